#include "rocl/uwb_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rocl/errors.hpp"

namespace rocl {
namespace {

constexpr double kSkewPriorStd = 1e-4;  // oscillators are within 100 ppm

double quantize(double timestamp, double resolution) {
  if (resolution <= 0.0) return timestamp;
  return std::round(timestamp / resolution) * resolution;
}

}  // namespace

ClockState advance_clock(const ClockState& c, const ClockConfig& cfg, double true_dt,
                         NoiseStream& rng) {
  if (true_dt < 0.0) {
    throw std::invalid_argument("advance_clock: cannot advance backwards");
  }
  ClockState out;
  out.offset = c.offset + c.skew * true_dt +
               rng.gaussian(std::sqrt(cfg.offset_walk_density * true_dt));
  out.skew = c.skew + rng.gaussian(std::sqrt(cfg.skew_walk_density * true_dt));
  return out;
}

TdmaSchedule make_round_robin_schedule(int num_vehicles, double frame_rate) {
  if (num_vehicles < 1) {
    throw std::invalid_argument("make_round_robin_schedule: need at least one vehicle");
  }
  if (!(frame_rate > 0.0)) {
    throw std::invalid_argument("make_round_robin_schedule: frame rate must be positive");
  }
  TdmaSchedule schedule;
  schedule.frame_rate = frame_rate;
  schedule.slot_owner.resize(num_vehicles);
  for (int i = 0; i < num_vehicles; ++i) schedule.slot_owner[i] = i;
  return schedule;
}

UwbNetwork::UwbNetwork(TdmaSchedule schedule, ClockConfig clock_config, ChannelConfig channel,
                       std::uint64_t seed)
    : schedule_(std::move(schedule)),
      clock_config_(clock_config),
      channel_(channel),
      rng_(seed),
      clocks_(schedule_.num_slots()) {
  std::vector<int> owners = schedule_.slot_owner;
  std::sort(owners.begin(), owners.end());
  for (int i = 0; i < static_cast<int>(owners.size()); ++i) {
    if (owners[i] != i) {
      throw std::invalid_argument("UwbNetwork: slot owners must be a permutation of vehicles");
    }
  }
}

void UwbNetwork::set_initial_clock(int vehicle, const ClockState& state) {
  clocks_.at(vehicle) = state;
}

std::vector<Packet> UwbNetwork::run_frame(std::int64_t frame, const PositionFn& position_of,
                                          const PayloadFn& payload_of) {
  const int n = schedule_.num_slots();
  std::vector<Packet> packets;
  packets.reserve(n);

  for (int slot = 0; slot < n; ++slot) {
    const double slot_rel = schedule_.slot_offset(slot);
    const double t_slot = frame * schedule_.frame_period() + slot_rel;

    for (int v = 0; v < n; ++v) {
      clocks_[v] = advance_clock(clocks_[v], clock_config_, t_slot - clock_time_, rng_);
    }
    clock_time_ = t_slot;

    const int sender = schedule_.slot_owner[slot];
    Packet p;
    p.sender_id = sender;
    p.slot_index = slot;
    p.frame_index = frame;
    // Relative timestamps are built from the slot offset directly; going
    // through absolute time would shed picoseconds to rounding.
    p.tx_timestamp = quantize(slot_rel + clocks_[sender].offset, clock_config_.quantization);
    if (clock_params_) p.clock_params = clock_params_(sender);
    p.motion_payload = payload_of(sender);

    const Eigen::Vector2d tx_position = position_of(sender, t_slot);
    for (int rx = 0; rx < n; ++rx) {
      if (rx == sender) continue;
      const double distance = (position_of(rx, t_slot) - tx_position).norm();
      // Both draws happen for every receiver so the stream stays aligned
      // whatever the drop outcome.
      const bool dropped = rng_.chance(channel_.drop_probability);
      const double jitter = rng_.gaussian(channel_.rx_jitter_std);
      if (dropped) continue;
      const double rx_rel = slot_rel + distance / kSpeedOfLight + clocks_[rx].offset + jitter;
      p.rx_records.push_back({rx, quantize(rx_rel, clock_config_.quantization)});
    }
    packets.push_back(std::move(p));
  }
  return packets;
}

PairClockFilter::PairClockFilter(double q_offset, double q_skew, double measurement_var)
    : q_offset_(q_offset), q_skew_(q_skew), measurement_var_(measurement_var) {
  if (q_offset < 0.0 || q_skew < 0.0 || !(measurement_var > 0.0)) {
    throw std::invalid_argument("PairClockFilter: invalid noise parameters");
  }
}

void PairClockFilter::predict_to(double t) {
  if (!initialized_) return;
  const double dt = t - last_time_;
  if (dt <= 0.0) return;

  state_(0) += state_(1) * dt;
  Eigen::Matrix2d f = Eigen::Matrix2d::Identity();
  f(0, 1) = dt;
  Eigen::Matrix2d q;
  q << q_offset_ * dt + q_skew_ * dt * dt * dt / 3.0, q_skew_ * dt * dt / 2.0,
      q_skew_ * dt * dt / 2.0, q_skew_ * dt;
  covariance_ = f * covariance_ * f.transpose() + q;
  last_time_ = t;
}

void PairClockFilter::observe(double measured_offset, double t) {
  if (!initialized_) {
    state_ << measured_offset, 0.0;
    covariance_ = Eigen::Vector2d(measurement_var_, kSkewPriorStd * kSkewPriorStd).asDiagonal();
    last_time_ = t;
    last_observation_ = t;
    last_innovation_ = 0.0;
    initialized_ = true;
    return;
  }

  predict_to(t);
  const double innovation = measured_offset - state_(0);
  const double s = covariance_(0, 0) + measurement_var_;
  const Eigen::Vector2d gain = covariance_.col(0) / s;
  state_ += gain * innovation;
  const Eigen::Matrix2d ikh =
      Eigen::Matrix2d::Identity() - gain * Eigen::RowVector2d(1.0, 0.0);
  covariance_ = ikh * covariance_ * ikh.transpose() + measurement_var_ * gain * gain.transpose();
  last_time_ = t;
  last_observation_ = t;
  last_innovation_ = innovation;
}

double extract_tof_range(const ReciprocalTimestamps& ts, const PairClockFilter& filter) {
  if (!filter.initialized()) {
    throw StaleInputError("extract_tof_range: pair clock filter has never been updated");
  }
  // Map b's stamps onto a's clock. The correction drifts with the estimated
  // skew across the frame, so each stamp is corrected at its own epoch.
  const auto to_a_clock = [&](double stamp_b) {
    return stamp_b - (filter.offset() + filter.skew() * stamp_b);
  };
  const double tof_ab = to_a_clock(ts.rx_b) - ts.tx_a;
  const double tof_ba = ts.rx_a - to_a_clock(ts.tx_b);
  const double distance = 0.5 * (tof_ab + tof_ba) * kSpeedOfLight;
  return std::max(distance, 0.0);
}

Sniffer::Sniffer(int num_vehicles, SnifferConfig config) : n_(num_vehicles), config_(config) {
  if (num_vehicles < 2) {
    throw std::invalid_argument("Sniffer: need at least two vehicles");
  }
  const int pairs = num_vehicles * (num_vehicles - 1) / 2;
  filters_.reserve(pairs);
  for (int i = 0; i < pairs; ++i) {
    filters_.emplace_back(config_.q_offset, config_.q_skew, config_.offset_measurement_var);
  }
}

int Sniffer::index_of_pair(int a, int b) const {
  if (a < 0 || b < 0 || a >= n_ || b >= n_ || a == b) {
    throw std::invalid_argument("Sniffer: invalid vehicle pair");
  }
  const int lo = std::min(a, b);
  const int hi = std::max(a, b);
  // Upper-triangle row-major index of (lo, hi).
  return lo * n_ - lo * (lo + 1) / 2 + (hi - lo - 1);
}

const PairClockFilter& Sniffer::pair_filter(int a, int b) const {
  return filters_[index_of_pair(a, b)];
}

SnifferOutput Sniffer::collect(const std::vector<Packet>& frame_packets, std::int64_t frame) {
  SnifferOutput out;
  const double t_frame = frame * config_.frame_period;

  std::vector<const Packet*> by_sender(n_, nullptr);
  for (const auto& p : frame_packets) {
    if (p.sender_id < 0 || p.sender_id >= n_) {
      throw std::invalid_argument("Sniffer: packet from unknown vehicle");
    }
    by_sender[p.sender_id] = &p;
  }

  const auto rx_of = [](const Packet& p, int receiver) -> const RxRecord* {
    for (const auto& r : p.rx_records) {
      if (r.receiver_id == receiver) return &r;
    }
    return nullptr;
  };

  for (int a = 0; a < n_; ++a) {
    for (int b = a + 1; b < n_; ++b) {
      PairClockFilter& filter = filters_[index_of_pair(a, b)];
      PairClockReport report;
      report.id_a = a;
      report.id_b = b;

      const Packet* pa = by_sender[a];
      const Packet* pb = by_sender[b];
      const RxRecord* rx_b = pa ? rx_of(*pa, b) : nullptr;
      const RxRecord* rx_a = pb ? rx_of(*pb, a) : nullptr;

      if (rx_a && rx_b) {
        ReciprocalTimestamps ts{pa->tx_timestamp, rx_b->rx_timestamp, pb->tx_timestamp,
                                rx_a->rx_timestamp};
        // In the difference of the two one-way pseudo-ranges the flight time
        // cancels and twice the relative offset remains.
        const double measured_offset =
            0.5 * ((ts.rx_b - ts.tx_a) - (ts.rx_a - ts.tx_b));
        filter.observe(measured_offset, t_frame);
        // Averaging the two one-way flights yields the distance at the middle
        // of the two emission slots, so that is the time the sample carries.
        const double slot_duration = config_.frame_period / n_;
        const double t_mid =
            t_frame + 0.5 * (pa->slot_index + pb->slot_index) * slot_duration;
        out.ranges.push_back({a, b, extract_tof_range(ts, filter), t_mid});
        report.updated = true;
      } else {
        filter.predict_to(t_frame);
      }

      const bool fresh =
          filter.initialized() &&
          t_frame - filter.last_observation_time() <=
              config_.stale_frames * config_.frame_period;
      if (fresh) {
        report.offset = filter.offset();
        report.skew = filter.skew();
        report.innovation = filter.last_innovation();
      }
      out.clock_reports.push_back(report);
    }
  }

  for (const auto& p : frame_packets) {
    for (const auto& m : p.motion_payload) {
      auto it = last_motion_time_.find(m.vehicle_id);
      if (it == last_motion_time_.end() || m.timestamp > it->second) {
        out.motions.push_back(m);
        last_motion_time_[m.vehicle_id] = m.timestamp;
      }
    }
  }
  return out;
}

void write_packet_log(std::ostream& os, const std::vector<Packet>& frame_packets) {
  char buffer[64];
  for (const auto& p : frame_packets) {
    os << p.frame_index << ' ' << p.slot_index << ' ' << p.sender_id;
    std::snprintf(buffer, sizeof buffer, " %.17g", p.tx_timestamp);
    os << buffer;
    for (const auto& r : p.rx_records) {
      os << ' ' << r.receiver_id;
      std::snprintf(buffer, sizeof buffer, " %.17g", r.rx_timestamp);
      os << buffer;
    }
    os << '\n';
  }
}

std::vector<std::vector<Packet>> read_packet_log(std::istream& is) {
  std::vector<std::vector<Packet>> frames;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    Packet p;
    if (!(fields >> p.frame_index >> p.slot_index >> p.sender_id >> p.tx_timestamp)) {
      throw std::runtime_error("read_packet_log: malformed line: " + line);
    }
    RxRecord record;
    while (fields >> record.receiver_id >> record.rx_timestamp) {
      p.rx_records.push_back(record);
    }
    if (frames.empty() || frames.back().back().frame_index != p.frame_index) {
      frames.emplace_back();
    }
    frames.back().push_back(std::move(p));
  }
  return frames;
}

}  // namespace rocl
