#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "rocl/kinematics.hpp"
#include "rocl/noise.hpp"

namespace rocl {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Oscillator imperfection model per vehicle.
struct ClockConfig {
  double offset_walk_density{1e-21};  // s^2 per second of offset random walk
  double skew_walk_density{1e-23};    // 1/s of skew random walk
  double quantization{15.65e-12};     // timestamp resolution in s; 0 disables
};

// Offset and skew of one local clock relative to true time.
struct ClockState {
  double offset{0.0};  // s
  double skew{0.0};    // dimensionless (s per s)
};

// Random-walks offset and skew across true_dt seconds; the offset also
// integrates the skew. Two Gaussian draws are consumed per call.
ClockState advance_clock(const ClockState& c, const ClockConfig& cfg, double true_dt,
                         NoiseStream& rng);

// Round-robin broadcast schedule: slot s of every frame belongs to vehicle
// slot_owner[s]; each frame lasts 1 / frame_rate seconds, split evenly.
struct TdmaSchedule {
  double frame_rate{100.0};  // frames per second
  std::vector<int> slot_owner;

  double frame_period() const { return 1.0 / frame_rate; }
  double slot_duration() const { return frame_period() / slot_owner.size(); }
  // True time of a slot within a frame, relative to the frame origin.
  double slot_offset(int slot) const { return slot * slot_duration(); }
  int num_slots() const { return static_cast<int>(slot_owner.size()); }
};

TdmaSchedule make_round_robin_schedule(int num_vehicles, double frame_rate);

// Radio propagation and reception model.
struct ChannelConfig {
  double drop_probability{0.0};  // per receiver per packet
  double rx_jitter_std{0.0};     // s of Gaussian receive timestamp noise
};

// Reception record appended to the sender's packet by one receiver.
struct RxRecord {
  int receiver_id{0};
  double rx_timestamp{0.0};  // receiver clock, relative to the frame origin
};

// Clock parameters the sender republishes for its neighbors.
struct ClockParam {
  int neighbor_id{0};
  double offset{0.0};
  double skew{0.0};
};

// One broadcast: emitted in the sender's slot, stamped on the sender's clock,
// and annotated by every vehicle that heard it. All timestamps are seconds
// relative to the frame origin, which keeps the arithmetic well-conditioned
// at picosecond scales.
struct Packet {
  int sender_id{0};
  int slot_index{0};
  std::int64_t frame_index{0};
  double tx_timestamp{0.0};
  std::vector<ClockParam> clock_params;
  std::vector<MotionMeasurement> motion_payload;
  std::vector<RxRecord> rx_records;
};

// Full TDMA radio simulation: per-vehicle clocks, slot timing, propagation
// delays, drops, and receive jitter. Positions are queried through a
// callback so the caller owns the motion model.
class UwbNetwork {
 public:
  using PositionFn = std::function<Eigen::Vector2d(int vehicle, double true_time)>;
  using PayloadFn = std::function<std::vector<MotionMeasurement>(int vehicle)>;
  using ClockParamFn = std::function<std::vector<ClockParam>(int vehicle)>;

  UwbNetwork(TdmaSchedule schedule, ClockConfig clock_config, ChannelConfig channel,
             std::uint64_t seed);

  void set_initial_clock(int vehicle, const ClockState& state);
  void set_clock_param_source(ClockParamFn fn) { clock_params_ = std::move(fn); }

  // Runs every slot of one frame in order. payload_of supplies the motion
  // samples the sender embeds (empty when it has nothing new).
  std::vector<Packet> run_frame(std::int64_t frame, const PositionFn& position_of,
                                const PayloadFn& payload_of);

  const ClockState& clock(int vehicle) const { return clocks_.at(vehicle); }
  int num_vehicles() const { return schedule_.num_slots(); }

 private:
  TdmaSchedule schedule_;
  ClockConfig clock_config_;
  ChannelConfig channel_;
  NoiseStream rng_;
  std::vector<ClockState> clocks_;
  double clock_time_{0.0};  // true time the clock states are valid at
  ClockParamFn clock_params_;
};

// Local timestamps of one reciprocal exchange between vehicles a and b, all
// relative to the same frame origin.
struct ReciprocalTimestamps {
  double tx_a{0.0};  // a's clock: emission of a's packet
  double rx_b{0.0};  // b's clock: arrival of a's packet
  double tx_b{0.0};  // b's clock: emission of b's packet
  double rx_a{0.0};  // a's clock: arrival of b's packet
};

// Relative clock (offset, skew) of b with respect to a, tracked by a
// two-state Kalman filter fed once per frame with the reciprocal offset
// combination (the propagation delay cancels in it).
class PairClockFilter {
 public:
  PairClockFilter(double q_offset, double q_skew, double measurement_var);

  // Offset observation derived from one reciprocal exchange at true frame
  // time t. The first call initializes the state.
  void observe(double measured_offset, double t);
  // Prediction-only when a frame yields no reciprocal pair.
  void predict_to(double t);

  bool initialized() const { return initialized_; }
  double offset() const { return state_(0); }
  double skew() const { return state_(1); }
  double last_time() const { return last_time_; }
  double last_observation_time() const { return last_observation_; }
  double last_innovation() const { return last_innovation_; }

 private:
  Eigen::Vector2d state_{0.0, 0.0};
  Eigen::Matrix2d covariance_{Eigen::Matrix2d::Zero()};
  double q_offset_;
  double q_skew_;
  double measurement_var_;
  double last_time_{0.0};
  double last_observation_{-1.0};
  double last_innovation_{0.0};
  bool initialized_{false};
};

// Two-way time-of-flight distance from one reciprocal exchange. The b-side
// timestamps are first mapped onto a's clock with the filter estimate, then
// the two one-way flight times are averaged so the residual offset error
// cancels to first order.
double extract_tof_range(const ReciprocalTimestamps& ts, const PairClockFilter& filter);

struct PairClockReport {
  int id_a{0};
  int id_b{0};
  double offset{0.0};
  double skew{0.0};
  double innovation{0.0};
  bool updated{false};
};

struct SnifferOutput {
  std::vector<RangeMeasurement> ranges;
  std::vector<MotionMeasurement> motions;
  std::vector<PairClockReport> clock_reports;
};

struct SnifferConfig {
  double frame_period{0.01};
  double q_offset{1e-21};
  double q_skew{1e-23};
  double offset_measurement_var{1e-22};  // of the reciprocal offset combination
  int stale_frames{5};  // reject pairs whose filter fell this many frames behind
};

// Passive observer of the whole broadcast traffic: matches reciprocal
// timestamp pairs, runs one clock filter per vehicle pair, extracts
// time-of-flight ranges, and de-duplicates the embedded motion samples.
class Sniffer {
 public:
  Sniffer(int num_vehicles, SnifferConfig config);

  SnifferOutput collect(const std::vector<Packet>& frame_packets, std::int64_t frame);

  const PairClockFilter& pair_filter(int a, int b) const;

 private:
  int index_of_pair(int a, int b) const;

  int n_;
  SnifferConfig config_;
  std::vector<PairClockFilter> filters_;  // upper-triangle order
  std::map<int, double> last_motion_time_;
};

// One line per packet: "frame slot sender tx [receiver rx]...", numbers
// printed to round-trip exactly.
void write_packet_log(std::ostream& os, const std::vector<Packet>& frame_packets);

// Parses a packet log back into per-frame packet groups. Clock parameters
// and motion payloads are not logged; replay reconstructs them elsewhere.
std::vector<std::vector<Packet>> read_packet_log(std::istream& is);

}  // namespace rocl
