#include "rocl/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rocl/errors.hpp"

namespace rocl {
namespace {

constexpr double kTimestampTol = 1e-9;
constexpr double kCoincidentRange = 1e-12;
constexpr double kMeasurementVarFloor = 1e-12;  // keeps the innovation factorizable

std::pair<int, int> canonical_pair(int a, int b) {
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace

int FleetBelief::index_of(int vehicle_id) const {
  for (size_t i = 0; i < dynamic_ids.size(); ++i) {
    if (dynamic_ids[i] == vehicle_id) return static_cast<int>(i);
  }
  return -1;
}

const VehicleState& FleetBelief::state_of(int vehicle_id) const {
  const int idx = index_of(vehicle_id);
  if (idx < 0) {
    throw std::invalid_argument("FleetBelief: vehicle is not estimated");
  }
  return nominal[idx];
}

Eigen::Matrix3d propagation_jacobian(double v_mid, double theta_mid, double dt) {
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f(0, 2) = -v_mid * dt * std::sin(theta_mid);
  f(1, 2) = v_mid * dt * std::cos(theta_mid);
  return f;
}

Eigen::Matrix3d propagation_noise(double theta_mid, const NoiseSpec& noise, double dt) {
  const double c = std::cos(theta_mid);
  const double s = std::sin(theta_mid);
  const double v_var = noise.sigma_v * noise.sigma_v * dt * dt;
  const double w_var = noise.sigma_omega * noise.sigma_omega * dt * dt;
  return Eigen::Vector3d(c * c * v_var, s * s * v_var, w_var).asDiagonal();
}

FleetBelief propagate(const FleetBelief& belief, const std::map<int, MotionPair>& motions,
                      const ProcessNoiseSpec& noise) {
  const int n = static_cast<int>(belief.dynamic_ids.size());
  if (n == 0) {
    throw std::invalid_argument("propagate: belief holds no dynamic vehicles");
  }

  if (belief.covariance.rows() != 3 * n || belief.covariance.cols() != 3 * n) {
    throw std::invalid_argument("propagate: covariance dimension mismatch");
  }

  FleetBelief out = belief;
  std::vector<Eigen::Matrix3d> blocks(n);
  double step_end = belief.last_update_time;

  for (int i = 0; i < n; ++i) {
    const int id = belief.dynamic_ids[i];
    const auto found = motions.find(id);
    if (found == motions.end()) {
      throw StaleInputError("propagate: no motion pair for vehicle " + std::to_string(id));
    }
    const auto& [u0, u1] = found->second;
    const double dt = u1.timestamp - u0.timestamp;
    if (std::abs(dt - noise.dt) > kTimestampTol) {
      throw std::invalid_argument("propagate: sample spacing disagrees with the tick period");
    }
    if (!noise.per_vehicle.count(id)) {
      throw std::invalid_argument("propagate: no noise spec for vehicle " + std::to_string(id));
    }

    const double v_mid = 0.5 * (u0.linear_velocity + u1.linear_velocity);
    const double omega_mid = 0.5 * (u0.turn_rate + u1.turn_rate);
    const double theta_mid = belief.nominal[i].heading + 0.5 * omega_mid * dt;

    out.nominal[i] = propagate_midpoint(belief.nominal[i], u0, u1);
    blocks[i] = propagation_jacobian(v_mid, theta_mid, dt);
    step_end = u1.timestamp;
  }

  // P <- F P F^T + Q with block-diagonal F.
  Eigen::MatrixXd& p = out.covariance;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      p.block<3, 3>(3 * i, 3 * j) =
          blocks[i] * belief.covariance.block<3, 3>(3 * i, 3 * j) * blocks[j].transpose();
    }
  }
  for (int i = 0; i < n; ++i) {
    const int id = belief.dynamic_ids[i];
    const auto& [u0, u1] = motions.at(id);
    const double dt = u1.timestamp - u0.timestamp;
    const double omega_mid = 0.5 * (u0.turn_rate + u1.turn_rate);
    const double theta_mid = belief.nominal[i].heading + 0.5 * omega_mid * dt;
    p.block<3, 3>(3 * i, 3 * i) +=
        propagation_noise(theta_mid, noise.per_vehicle.at(id), dt);
  }
  p = 0.5 * (p + p.transpose()).eval();

  out.last_update_time = step_end;
  return out;
}

SmoothingQueue::SmoothingQueue(int window, double decay) : window_(window), decay_(decay) {
  if (window < 1) {
    throw std::invalid_argument("SmoothingQueue: window must hold at least one sample");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw std::invalid_argument("SmoothingQueue: decay must lie in (0, 1]");
  }
}

RangeMeasurement SmoothingQueue::push(const RangeMeasurement& incoming) {
  samples_.push_back(incoming);
  if (static_cast<int>(samples_.size()) > window_) {
    samples_.pop_front();
  }

  double weight = 1.0;
  double total_weight = 0.0;
  double weighted_distance = 0.0;
  for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
    weighted_distance += weight * it->distance;
    total_weight += weight;
    weight *= decay_;
  }

  RangeMeasurement smoothed = samples_.back();
  smoothed.distance = weighted_distance / total_weight;
  return smoothed;
}

double SmoothingQueue::variance_factor(int window, double decay) {
  if (window < 1 || !(decay > 0.0) || decay > 1.0) {
    throw std::invalid_argument("SmoothingQueue: invalid window or decay");
  }
  double weight = 1.0, sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < window; ++k) {
    sum += weight;
    sum_sq += weight * weight;
    weight *= decay;
  }
  return sum_sq / (sum * sum);
}

Eigen::RowVectorXd range_jacobian_row(const FleetBelief& belief, int id_a, int id_b) {
  const int ia = belief.index_of(id_a);
  const int ib = belief.index_of(id_b);
  if (ia < 0 && ib < 0) {
    throw std::invalid_argument("range_jacobian_row: neither endpoint is estimated");
  }

  const auto position_of = [&](int id, int idx) -> Eigen::Vector2d {
    if (idx >= 0) return belief.nominal[idx].position;
    const auto anchor = belief.static_anchors.find(id);
    if (anchor == belief.static_anchors.end()) {
      throw std::invalid_argument("range_jacobian_row: unknown vehicle " + std::to_string(id));
    }
    return anchor->second;
  };

  const Eigen::Vector2d pa = position_of(id_a, ia);
  const Eigen::Vector2d pb = position_of(id_b, ib);
  const Eigen::Vector2d diff = pa - pb;
  const double norm = diff.norm();
  if (norm <= kCoincidentRange) {
    throw DegenerateConfigError("range_jacobian_row: predicted positions coincide");
  }
  const Eigen::Vector2d unit = diff / norm;

  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(belief.dimension());
  if (ia >= 0) {
    row(3 * ia) = unit.x();
    row(3 * ia + 1) = unit.y();
  }
  if (ib >= 0) {
    row(3 * ib) = -unit.x();
    row(3 * ib + 1) = -unit.y();
  }
  return row;
}

FleetBelief update(const FleetBelief& belief, const std::vector<RangeMeasurement>& ranges,
                   double sigma_range, double gate_sigma, UpdateStats* stats) {
  UpdateStats local;
  const int dim = belief.dimension();
  if (dim == 0) {
    throw std::invalid_argument("update: belief holds no dynamic vehicles");
  }

  const auto predicted_range = [&](int id_a, int id_b) {
    const auto position_of = [&](int id) -> Eigen::Vector2d {
      const int idx = belief.index_of(id);
      if (idx >= 0) return belief.nominal[idx].position;
      return belief.static_anchors.at(id);
    };
    return (position_of(id_a) - position_of(id_b)).norm();
  };

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> innovations;
  for (const auto& r : ranges) {
    const bool a_est = belief.index_of(r.id_a) >= 0;
    const bool b_est = belief.index_of(r.id_b) >= 0;
    if (!a_est && !b_est) continue;  // anchor-to-anchor ranges carry no information
    try {
      rows.push_back(range_jacobian_row(belief, r.id_a, r.id_b));
      innovations.push_back(r.distance - predicted_range(r.id_a, r.id_b));
    } catch (const DegenerateConfigError&) {
      ++local.rows_degenerate;
    }
  }

  if (rows.empty()) {
    if (stats) *stats = local;
    return belief;
  }

  const double r_var = std::max(sigma_range * sigma_range, kMeasurementVarFloor);
  const auto assemble = [&](const std::vector<Eigen::RowVectorXd>& use_rows,
                            const std::vector<double>& use_innov, Eigen::MatrixXd& h,
                            Eigen::VectorXd& nu, Eigen::MatrixXd& s) {
    const int m = static_cast<int>(use_rows.size());
    h.resize(m, dim);
    nu.resize(m);
    for (int k = 0; k < m; ++k) {
      h.row(k) = use_rows[k];
      nu(k) = use_innov[k];
    }
    s = h * belief.covariance * h.transpose();
    s.diagonal().array() += r_var;
  };

  Eigen::MatrixXd h, s;
  Eigen::VectorXd nu;
  assemble(rows, innovations, h, nu, s);

  // Chi-square gate per row against its own innovation variance.
  std::vector<Eigen::RowVectorXd> kept_rows;
  std::vector<double> kept_innov;
  for (int k = 0; k < nu.size(); ++k) {
    if (std::abs(nu(k)) > gate_sigma * std::sqrt(s(k, k))) {
      ++local.rows_gated;
    } else {
      kept_rows.push_back(rows[k]);
      kept_innov.push_back(innovations[k]);
    }
  }
  if (kept_rows.empty()) {
    if (stats) *stats = local;
    return belief;
  }
  if (kept_rows.size() != rows.size()) {
    assemble(kept_rows, kept_innov, h, nu, s);
  }

  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    local.skipped = true;
    if (stats) *stats = local;
    return belief;
  }

  const Eigen::MatrixXd gain = belief.covariance * h.transpose() * llt.solve(
      Eigen::MatrixXd::Identity(nu.size(), nu.size()));
  const Eigen::VectorXd correction = gain * nu;

  FleetBelief out = belief;
  for (size_t i = 0; i < out.nominal.size(); ++i) {
    out.nominal[i].position.x() += correction(3 * i);
    out.nominal[i].position.y() += correction(3 * i + 1);
    out.nominal[i].heading = wrap_angle(out.nominal[i].heading + correction(3 * i + 2));
  }

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd ikh = identity - gain * h;
  out.covariance = ikh * belief.covariance * ikh.transpose() +
                   r_var * gain * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();

  local.rows_used = static_cast<int>(kept_rows.size());
  if (stats) *stats = local;
  return out;
}

FleetBelief step(const FleetBelief& belief, const std::map<int, MotionPair>& motions,
                 const std::vector<RangeMeasurement>& ranges, const ProcessNoiseSpec& noise,
                 double sigma_range, double gate_sigma, UpdateStats* stats) {
  for (const auto& [id, pair] : motions) {
    if (pair.second.timestamp <= belief.last_update_time + kTimestampTol) {
      throw std::invalid_argument("step: motion pair does not advance the belief time");
    }
  }
  const FleetBelief predicted = propagate(belief, motions, noise);
  for (const auto& r : ranges) {
    if (r.timestamp > predicted.last_update_time + 1e-6) {
      throw std::invalid_argument("step: range measurement from the future");
    }
  }
  return update(predicted, ranges, sigma_range, gate_sigma, stats);
}

FleetEstimator::FleetEstimator(FleetBelief initial, ProcessNoiseSpec noise,
                               EstimatorConfig config)
    : belief_(std::move(initial)), noise_(std::move(noise)), config_(config) {
  if (belief_.dynamic_ids.empty()) {
    throw std::invalid_argument("FleetEstimator: belief holds no dynamic vehicles");
  }
  if (belief_.covariance.rows() != belief_.dimension() ||
      belief_.covariance.cols() != belief_.dimension()) {
    throw std::invalid_argument("FleetEstimator: covariance dimension mismatch");
  }
}

std::optional<Eigen::Vector2d> FleetEstimator::nominal_position_at(int id, double tau) const {
  const auto anchor = belief_.static_anchors.find(id);
  if (anchor != belief_.static_anchors.end()) return anchor->second;
  const int index = belief_.index_of(id);
  if (index < 0) return std::nullopt;
  const auto held = last_motion_.find(id);
  if (held == last_motion_.end()) return std::nullopt;
  const VehicleState& at_tick = belief_.nominal[index];
  const double dt = tau - belief_.last_update_time;
  if (dt <= 0.0) return at_tick.position;
  return propagate_exact(at_tick, held->second.linear_velocity, held->second.turn_rate, dt)
      .position;
}

void FleetEstimator::push_range(const RangeMeasurement& r) {
  RangeMeasurement sample = r;

  // The sample was taken mid-frame while the vehicles kept moving. Carry it
  // forward to the upcoming tick along the nominal trajectories (commands are
  // held across the tick) so the innovation compares same-time quantities.
  if (primed_) {
    const double t_next = belief_.last_update_time + noise_.dt;
    const auto pa0 = nominal_position_at(r.id_a, r.timestamp);
    const auto pb0 = nominal_position_at(r.id_b, r.timestamp);
    const auto pa1 = nominal_position_at(r.id_a, t_next);
    const auto pb1 = nominal_position_at(r.id_b, t_next);
    if (pa0 && pb0 && pa1 && pb1) {
      sample.distance += (*pa1 - *pb1).norm() - (*pa0 - *pb0).norm();
      sample.timestamp = t_next;
    }
  }

  const auto key = canonical_pair(sample.id_a, sample.id_b);
  auto it = queues_.find(key);
  if (it == queues_.end()) {
    it = queues_
             .emplace(key, SmoothingQueue(config_.smoothing_window, config_.smoothing_decay))
             .first;
  }
  smoothed_[key] = it->second.push(sample);
}

void FleetEstimator::tick(const std::vector<MotionMeasurement>& motions, double t) {
  std::map<int, MotionMeasurement> fresh;
  for (const auto& m : motions) {
    if (belief_.index_of(m.vehicle_id) >= 0) fresh[m.vehicle_id] = m;
  }

  if (!primed_) {
    for (const auto& [id, m] : fresh) {
      last_motion_[id] = m;
      hold_count_[id] = 0;
    }
    primed_ = last_motion_.size() == belief_.dynamic_ids.size();
    return;
  }

  std::map<int, MotionPair> pairs;
  ProcessNoiseSpec tick_noise = noise_;
  for (int id : belief_.dynamic_ids) {
    MotionMeasurement previous = last_motion_.at(id);
    MotionMeasurement current;
    const auto found = fresh.find(id);
    if (found != fresh.end()) {
      current = found->second;
      hold_count_[id] = 0;
    } else {
      // Hold the last sample; after the budget, widen that vehicle's noise.
      current = previous;
      current.timestamp = t;
      ++hold_count_[id];
      ++counters_.held_ticks;
      if (hold_count_[id] > config_.max_hold_ticks) {
        NoiseSpec& ns = tick_noise.per_vehicle.at(id);
        const double factor = std::sqrt(config_.hold_inflation);
        ns.sigma_v *= factor;
        ns.sigma_omega *= factor;
      }
    }
    if (current.timestamp <= previous.timestamp) {
      current.timestamp = previous.timestamp + noise_.dt;
    }
    pairs[id] = {previous, current};
    last_motion_[id] = current;
  }

  std::vector<RangeMeasurement> ranges;
  for (const auto& [key, r] : smoothed_) {
    if (t - r.timestamp <= config_.range_staleness) ranges.push_back(r);
  }

  // Smoothing shrinks the per-sample range variance by the window's weight
  // factor; the update runs with the matching standard deviation.
  const double sigma_smoothed =
      config_.sigma_range *
      std::sqrt(SmoothingQueue::variance_factor(config_.smoothing_window,
                                                config_.smoothing_decay));
  UpdateStats stats;
  belief_ = step(belief_, pairs, ranges, tick_noise, sigma_smoothed, config_.gate_sigma,
                 &stats);
  ++counters_.ticks;
  counters_.rows_used += stats.rows_used;
  counters_.rows_gated += stats.rows_gated;
  counters_.rows_degenerate += stats.rows_degenerate;
  counters_.skipped_updates += stats.skipped ? 1 : 0;
}

}  // namespace rocl
