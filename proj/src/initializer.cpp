#include "rocl/initializer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rocl/errors.hpp"

namespace rocl {
namespace {

constexpr double kEigenvalueRelTol = 1e-9;
constexpr double kAnchorSeparationTol = 1e-9;
constexpr double kNormGuard = 1e-12;

void check_pair_indices(int i, int j, int n, const char* context) {
  if (i < 0 || i >= n || j < 0 || j >= n || i == j) {
    throw std::invalid_argument(std::string(context) + ": invalid pair index");
  }
}

}  // namespace

bool AdjacencyMatrix::complete() const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!valid(i, j)) return false;
    }
  }
  return n >= 2;
}

AdjacencyAccumulator::AdjacencyAccumulator(int num_vehicles)
    : n_(num_vehicles),
      sums_(Eigen::MatrixXd::Zero(num_vehicles, num_vehicles)),
      counts_(Eigen::MatrixXi::Zero(num_vehicles, num_vehicles)) {
  if (num_vehicles < 2) {
    throw std::invalid_argument("AdjacencyAccumulator: need at least two vehicles");
  }
}

void AdjacencyAccumulator::add(int i, int j, double distance) {
  check_pair_indices(i, j, n_, "AdjacencyAccumulator::add");
  if (!(distance >= 0.0) || !std::isfinite(distance)) {
    throw std::invalid_argument("AdjacencyAccumulator::add: distance must be finite and >= 0");
  }
  sums_(i, j) += distance;
  counts_(i, j) += 1;
}

int AdjacencyAccumulator::pair_count(int i, int j) const {
  check_pair_indices(i, j, n_, "AdjacencyAccumulator::pair_count");
  return counts_(i, j) + counts_(j, i);
}

int AdjacencyAccumulator::min_pair_count() const {
  int min_count = std::numeric_limits<int>::max();
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      min_count = std::min(min_count, counts_(i, j) + counts_(j, i));
    }
  }
  return min_count;
}

AdjacencyMatrix AdjacencyAccumulator::build() const {
  AdjacencyMatrix d;
  d.distances = Eigen::MatrixXd::Zero(n_, n_);
  d.valid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_, n_, false);
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      const int count = counts_(i, j) + counts_(j, i);
      if (count == 0) continue;
      const double mean = (sums_(i, j) + sums_(j, i)) / count;
      d.distances(i, j) = mean;
      d.distances(j, i) = mean;
      d.valid(i, j) = true;
      d.valid(j, i) = true;
    }
  }
  return d;
}

std::vector<Eigen::Vector2d> classical_mds(const AdjacencyMatrix& d) {
  const int n = d.size();
  if (n < 3) {
    throw std::invalid_argument("classical_mds: need at least three vehicles");
  }
  if (!d.complete()) {
    throw std::invalid_argument("classical_mds: distance matrix has unobserved pairs");
  }

  const Eigen::MatrixXd squared = d.distances.array().square();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd gram = -0.5 * centering * squared * centering;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(gram);
  if (eigen.info() != Eigen::Success) {
    throw std::runtime_error("classical_mds: eigendecomposition failed");
  }
  const auto& values = eigen.eigenvalues();  // ascending
  const double lambda1 = values(n - 1);
  const double lambda2 = values(n - 2);
  if (!(lambda1 > 0.0) || lambda2 <= kEigenvalueRelTol * lambda1) {
    throw DegenerateConfigError(
        "classical_mds: planar embedding is degenerate (collinear or noise-dominated)");
  }

  const Eigen::VectorXd axis1 = std::sqrt(lambda1) * eigen.eigenvectors().col(n - 1);
  const Eigen::VectorXd axis2 = std::sqrt(lambda2) * eigen.eigenvectors().col(n - 2);
  std::vector<Eigen::Vector2d> points(n);
  for (int i = 0; i < n; ++i) {
    points[i] = Eigen::Vector2d(axis1(i), axis2(i));
  }
  return points;
}

GaugeResult fix_gauge(const std::vector<Eigen::Vector2d>& points, int anchor1, int anchor2,
                      const std::map<int, int>& reference_signs) {
  const int n = static_cast<int>(points.size());
  check_pair_indices(anchor1, anchor2, n, "fix_gauge");

  const Eigen::Vector2d origin = points[anchor1];
  const Eigen::Vector2d baseline = points[anchor2] - origin;
  const double separation = baseline.norm();
  if (separation <= kAnchorSeparationTol) {
    throw DegenerateConfigError("fix_gauge: anchors coincide");
  }

  const double c = baseline.x() / separation;
  const double s = baseline.y() / separation;
  Eigen::Matrix2d rotation;  // rotates the baseline onto +x
  rotation << c, s, -s, c;

  GaugeResult result;
  result.points.resize(n);
  for (int i = 0; i < n; ++i) {
    result.points[i] = rotation * (points[i] - origin);
  }
  result.points[anchor1] = Eigen::Vector2d::Zero();
  result.points[anchor2] = Eigen::Vector2d(separation, 0.0);

  if (!reference_signs.empty()) {
    double vote = 0.0;
    for (const auto& [index, sign] : reference_signs) {
      if (index < 0 || index >= n) {
        throw std::invalid_argument("fix_gauge: sign hint index out of range");
      }
      if (sign != 1 && sign != -1) {
        throw std::invalid_argument("fix_gauge: sign hint must be +1 or -1");
      }
      vote += sign * result.points[index].y();
    }
    if (vote == 0.0) {
      throw DegenerateConfigError("fix_gauge: sign hints cannot resolve the reflection");
    }
    if (vote < 0.0) {
      for (auto& p : result.points) p.y() = -p.y();
      result.frame.reflected = true;
    }
  }

  result.frame.anchor1_id = anchor1;
  result.frame.anchor2_id = anchor2;
  result.frame.anchor1_position = Eigen::Vector2d::Zero();
  result.frame.anchor2_position = Eigen::Vector2d(separation, 0.0);
  return result;
}

double stress_cost(const std::vector<Eigen::Vector2d>& points, const AdjacencyMatrix& d) {
  const int n = d.size();
  if (static_cast<int>(points.size()) != n) {
    throw std::invalid_argument("stress_cost: point count does not match matrix size");
  }
  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!d.valid(i, j)) continue;
      const double residual = d.distances(i, j) - (points[i] - points[j]).norm();
      cost += residual * residual;
    }
  }
  return cost;
}

RefineResult refine_positions(const std::vector<Eigen::Vector2d>& points,
                              const AdjacencyMatrix& d, const FrameFix& frame,
                              const RefineOptions& options) {
  const int n = d.size();
  if (static_cast<int>(points.size()) != n) {
    throw std::invalid_argument("refine_positions: point count does not match matrix size");
  }
  check_pair_indices(frame.anchor1_id, frame.anchor2_id, n, "refine_positions");

  // Free-variable layout: anchor1 contributes nothing, anchor2 only its x.
  std::vector<std::array<int, 2>> var_of(n, {-1, -1});
  int num_vars = 0;
  for (int i = 0; i < n; ++i) {
    if (i == frame.anchor1_id) continue;
    var_of[i][0] = num_vars++;
    if (i != frame.anchor2_id) var_of[i][1] = num_vars++;
  }

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (d.valid(i, j)) pairs.emplace_back(i, j);
    }
  }

  RefineResult result;
  result.points = points;
  result.initial_cost = stress_cost(points, d);
  result.final_cost = result.initial_cost;

  const auto apply_step = [&](const std::vector<Eigen::Vector2d>& base,
                              const Eigen::VectorXd& delta, double alpha) {
    std::vector<Eigen::Vector2d> moved = base;
    for (int i = 0; i < n; ++i) {
      if (var_of[i][0] >= 0) moved[i].x() += alpha * delta(var_of[i][0]);
      if (var_of[i][1] >= 0) moved[i].y() += alpha * delta(var_of[i][1]);
    }
    return moved;
  };

  double cost = result.initial_cost;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd residuals(pairs.size());
    Eigen::MatrixXd jacobian = Eigen::MatrixXd::Zero(pairs.size(), num_vars);
    for (size_t k = 0; k < pairs.size(); ++k) {
      const auto [i, j] = pairs[k];
      Eigen::Vector2d diff = result.points[i] - result.points[j];
      const double norm = std::max(diff.norm(), kNormGuard);
      residuals(k) = d.distances(i, j) - norm;
      const Eigen::Vector2d direction = diff / norm;
      if (var_of[i][0] >= 0) jacobian(k, var_of[i][0]) = -direction.x();
      if (var_of[i][1] >= 0) jacobian(k, var_of[i][1]) = -direction.y();
      if (var_of[j][0] >= 0) jacobian(k, var_of[j][0]) = direction.x();
      if (var_of[j][1] >= 0) jacobian(k, var_of[j][1]) = direction.y();
    }

    Eigen::MatrixXd normal = jacobian.transpose() * jacobian;
    const Eigen::VectorXd gradient = jacobian.transpose() * residuals;
    Eigen::VectorXd delta;
    double damping = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> solver(
          normal + damping * Eigen::MatrixXd::Identity(num_vars, num_vars));
      if (solver.info() == Eigen::Success) {
        delta = solver.solve(-gradient);
        if (delta.allFinite()) break;
      }
      damping = damping == 0.0 ? 1e-9 : damping * 100.0;
    }
    if (delta.size() == 0 || !delta.allFinite()) {
      result.converged = true;  // cannot improve from here
      break;
    }

    double alpha = 1.0;
    double new_cost = cost;
    std::vector<Eigen::Vector2d> candidate;
    bool improved = false;
    for (int halvings = 0; halvings < 30; ++halvings) {
      candidate = apply_step(result.points, delta, alpha);
      new_cost = stress_cost(candidate, d);
      if (new_cost < cost) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    result.iterations = iter + 1;
    if (!improved) {
      result.converged = true;
      break;
    }

    result.points = std::move(candidate);
    const double decrease = cost - new_cost;
    cost = new_cost;
    if (decrease < options.cost_decrease_tol) {
      result.converged = true;
      break;
    }
  }

  result.final_cost = cost;
  return result;
}

LinearMotionWindow::LinearMotionWindow(int window_size, double gamma_omega, double gamma_v)
    : window_size_(window_size), gamma_omega_(gamma_omega), gamma_v_(gamma_v) {
  if (window_size < 2) {
    throw std::invalid_argument("LinearMotionWindow: window must hold at least two samples");
  }
  if (!(gamma_omega > 0.0) || !(gamma_v > 0.0)) {
    throw std::invalid_argument("LinearMotionWindow: thresholds must be positive");
  }
}

void LinearMotionWindow::push(const MotionMeasurement& m) {
  samples_.push_back(m);
  if (static_cast<int>(samples_.size()) > window_size_) {
    samples_.pop_front();
  }
}

bool LinearMotionWindow::full() const {
  return static_cast<int>(samples_.size()) == window_size_;
}

double LinearMotionWindow::turn_rate_energy() const {
  if (samples_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& m : samples_) sum += m.turn_rate * m.turn_rate;
  return sum / samples_.size();
}

double LinearMotionWindow::velocity_energy() const {
  if (samples_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& m : samples_) sum += m.linear_velocity * m.linear_velocity;
  return sum / samples_.size();
}

bool detect_linear_motion(const LinearMotionWindow& w) {
  return w.full() && w.turn_rate_energy() < w.gamma_omega() && w.velocity_energy() > w.gamma_v();
}

Eigen::Vector2d trilaterate(double d1, double d2, double baseline, int y_sign, double slack) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(baseline > 0.0) || !std::isfinite(d1) ||
      !std::isfinite(d2) || !std::isfinite(baseline)) {
    throw std::invalid_argument("trilaterate: distances must be finite and positive");
  }
  if (y_sign != 1 && y_sign != -1) {
    throw std::invalid_argument("trilaterate: y_sign must be +1 or -1");
  }
  if (slack < 0.0) {
    throw std::invalid_argument("trilaterate: slack must be >= 0");
  }

  double cos_phi = (d1 * d1 + baseline * baseline - d2 * d2) / (2.0 * d1 * baseline);
  if (std::abs(cos_phi) > 1.0 + slack) {
    std::ostringstream msg;
    msg << "trilaterate: ranges (" << d1 << ", " << d2 << ") inconsistent with baseline "
        << baseline;
    throw InconsistentRangesError(msg.str());
  }
  cos_phi = std::clamp(cos_phi, -1.0, 1.0);
  const double sin_phi = std::sqrt(1.0 - cos_phi * cos_phi);
  return {d1 * cos_phi, y_sign * d1 * sin_phi};
}

std::optional<HeadingFit> fit_track_heading(const std::vector<Eigen::Vector2d>& track,
                                            double min_displacement) {
  if (track.size() < 2) return std::nullopt;
  if ((track.back() - track.front()).norm() < min_displacement) return std::nullopt;

  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : track) centroid += p;
  centroid /= static_cast<double>(track.size());

  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : track) {
    const Eigen::Vector2d centered = p - centroid;
    scatter += centered * centered.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eigen(scatter);
  Eigen::Vector2d direction = eigen.eigenvectors().col(1);  // dominant axis
  if (direction.dot(track.back() - track.front()) < 0.0) {
    direction = -direction;
  }

  HeadingFit fit;
  fit.heading = std::atan2(direction.y(), direction.x());

  const Eigen::Vector2d normal(-direction.y(), direction.x());
  double perp_sq = 0.0;
  double along_spread = 0.0;
  for (const auto& p : track) {
    const Eigen::Vector2d centered = p - centroid;
    const double perp = centered.dot(normal);
    const double along = centered.dot(direction);
    perp_sq += perp * perp;
    along_spread += along * along;
  }
  const int dof = static_cast<int>(track.size()) - 2;
  fit.perp_variance = dof > 0 ? perp_sq / dof : 0.0;
  fit.heading_variance = along_spread > 0.0 ? fit.perp_variance / along_spread : 0.0;
  return fit;
}

std::optional<double> initial_heading(const std::vector<Eigen::Vector2d>& track,
                                      double min_displacement) {
  const auto fit = fit_track_heading(track, min_displacement);
  if (!fit) return std::nullopt;
  return fit->heading;
}

InitSession::InitSession(std::vector<int> vehicle_ids, std::vector<int> static_ids,
                         std::map<int, int> y_sign_hints, InitConfig config)
    : vehicle_ids_(std::move(vehicle_ids)),
      static_ids_(std::move(static_ids)),
      y_sign_hints_(std::move(y_sign_hints)),
      config_(config),
      accumulator_(static_cast<int>(vehicle_ids_.size())) {
  if (static_ids_.size() != 2) {
    throw std::invalid_argument("InitSession: exactly two static vehicles are required");
  }
  for (size_t i = 0; i < vehicle_ids_.size(); ++i) {
    index_of_[vehicle_ids_[i]] = static_cast<int>(i);
  }
  for (int id : static_ids_) {
    if (!index_of_.count(id)) {
      throw std::invalid_argument("InitSession: static id not in the fleet");
    }
  }
  if (config_.gamma_omega <= 0.0) {
    config_.gamma_omega = 9.0 * config_.noise.sigma_omega * config_.noise.sigma_omega;
  }
  if (config_.gamma_v <= 0.0) {
    config_.gamma_v = std::max(9.0 * config_.noise.sigma_v * config_.noise.sigma_v, 0.01);
  }
  if (config_.position_var_floor <= 0.0) {
    config_.position_var_floor = config_.noise.sigma_range * config_.noise.sigma_range;
  }
  if (config_.gamma_omega <= 0.0) {
    throw std::invalid_argument("InitSession: turn-rate threshold must be positive");
  }

  bool any_hint = false;
  for (const auto& [id, sign] : y_sign_hints_) {
    if (!index_of_.count(id)) {
      throw std::invalid_argument("InitSession: sign hint for unknown vehicle");
    }
    any_hint = true;
  }
  if (!any_hint) {
    throw std::invalid_argument("InitSession: at least one y-sign hint is required");
  }

  for (int id : vehicle_ids_) {
    if (std::find(static_ids_.begin(), static_ids_.end(), id) != static_ids_.end()) continue;
    tracks_.emplace(id, VehicleTrack{
                            LinearMotionWindow(config_.window_size, config_.gamma_omega,
                                               config_.gamma_v),
                            {}, std::nullopt, Eigen::Vector2d::Zero(), 0, false, 0.0});
  }
}

void InitSession::feed_static_range(const RangeMeasurement& r) {
  if (coordinates_ready_) return;
  const auto a = index_of_.find(r.id_a);
  const auto b = index_of_.find(r.id_b);
  if (a == index_of_.end() || b == index_of_.end()) {
    throw std::invalid_argument("InitSession: range for unknown vehicle");
  }
  accumulator_.add(a->second, b->second, r.distance);
}

bool InitSession::adjacency_ready() const {
  return accumulator_.min_pair_count() >= config_.adjacency_min_samples;
}

void InitSession::establish_coordinates() {
  if (coordinates_ready_) return;
  if (!adjacency_ready()) {
    throw InitializationError("InitSession: not enough ranging samples per pair");
  }

  const AdjacencyMatrix d = accumulator_.build();
  const auto embedded = classical_mds(d);

  std::map<int, int> hints_by_index;
  for (const auto& [id, sign] : y_sign_hints_) {
    hints_by_index[index_of_.at(id)] = sign;
  }
  const GaugeResult gauged = fix_gauge(embedded, index_of_.at(static_ids_[0]),
                                       index_of_.at(static_ids_[1]), hints_by_index);
  const RefineResult refined = refine_positions(gauged.points, d, gauged.frame, config_.refine);

  report_ = InitReport{};
  report_.frame.anchor1_id = static_ids_[0];
  report_.frame.anchor2_id = static_ids_[1];
  report_.frame.anchor1_position = refined.points[index_of_.at(static_ids_[0])];
  report_.frame.anchor2_position = refined.points[index_of_.at(static_ids_[1])];
  report_.frame.reflected = gauged.frame.reflected;
  report_.refine_initial_cost = refined.initial_cost;
  report_.refine_final_cost = refined.final_cost;
  report_.refine_converged = refined.converged;
  for (int id : vehicle_ids_) {
    report_.positions[id] = refined.points[index_of_.at(id)];
  }

  const double sign_floor = config_.y_reject_factor * config_.noise.sigma_range;
  for (auto& [id, track] : tracks_) {
    const double y = report_.positions[id].y();
    if (std::abs(y) < sign_floor) {
      track.sign_rejected = true;  // too close to the baseline to trust the side
    } else {
      track.y_sign = y >= 0.0 ? 1 : -1;
    }
  }

  coordinates_ready_ = true;
}

void InitSession::feed_motion(const MotionMeasurement& m) {
  if (!coordinates_ready_) return;
  const auto it = tracks_.find(m.vehicle_id);
  if (it == tracks_.end()) return;  // static vehicles take no part in phase 2
  it->second.window.push(m);
  if (detect_linear_motion(it->second.window)) {
    try_trilaterate(m.vehicle_id, m.timestamp);
  }
}

void InitSession::feed_range(const RangeMeasurement& r) {
  if (!coordinates_ready_) {
    feed_static_range(r);
    return;
  }
  const int anchor1 = static_ids_[0];
  const int anchor2 = static_ids_[1];
  const auto classify = [&](int id, int other) {
    if (id == anchor1 && tracks_.count(other)) {
      range_to_anchor1_[other] = {r.distance, r.timestamp};
    } else if (id == anchor2 && tracks_.count(other)) {
      range_to_anchor2_[other] = {r.distance, r.timestamp};
    }
  };
  classify(r.id_a, r.id_b);
  classify(r.id_b, r.id_a);
}

void InitSession::try_trilaterate(int id, double timestamp) {
  auto& track = tracks_.at(id);
  if (track.y_sign == 0) return;  // side of the baseline unresolved

  const auto r1 = range_to_anchor1_.find(id);
  const auto r2 = range_to_anchor2_.find(id);
  if (r1 == range_to_anchor1_.end() || r2 == range_to_anchor2_.end()) return;
  if (timestamp - r1->second.second > config_.range_freshness) return;
  if (timestamp - r2->second.second > config_.range_freshness) return;

  const double baseline = report_.frame.anchor2_position.x();
  try {
    const Eigen::Vector2d point =
        trilaterate(r1->second.first, r2->second.first, baseline, track.y_sign, config_.cos_slack);
    track.points.push_back(point);
    track.last_point = point;
    track.last_point_time = timestamp;
  } catch (const InconsistentRangesError&) {
    // Noise spike; skip this sample and keep collecting.
  }
}

bool InitSession::vehicle_ready(int id) const {
  const auto it = tracks_.find(id);
  if (it == tracks_.end()) return false;
  return fit_track_heading(it->second.points, config_.min_displacement).has_value();
}

bool InitSession::all_ready() const {
  return std::all_of(tracks_.begin(), tracks_.end(),
                     [this](const auto& entry) { return vehicle_ready(entry.first); });
}

InitReport InitSession::finish(double timestamp) const {
  if (!coordinates_ready_) {
    throw InitializationError("InitSession: coordinates were never established");
  }

  std::vector<int> missing;
  for (const auto& [id, track] : tracks_) {
    if (!vehicle_ready(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "InitSession: no usable heading for vehicle(s)";
    for (int id : missing) msg << " " << id;
    for (const auto& [id, track] : tracks_) {
      if (track.sign_rejected) {
        msg << "; vehicle " << id << " sits too close to the anchor baseline";
      }
    }
    throw InitializationError(msg.str());
  }

  InitReport out = report_;
  const AdjacencyMatrix d = accumulator_.build();
  for (const auto& [id, track] : tracks_) {
    const auto fit = fit_track_heading(track.points, config_.min_displacement);

    // Establishment residuals for this vehicle against the averaged ranges.
    const int idx = index_of_.at(id);
    double residual_sq = 0.0;
    int residual_count = 0;
    for (int j = 0; j < d.size(); ++j) {
      if (j == idx || !d.valid(idx, j)) continue;
      const double predicted =
          (out.positions.at(id) - out.positions.at(vehicle_ids_[j])).norm();
      const double residual = d.distances(idx, j) - predicted;
      residual_sq += residual * residual;
      ++residual_count;
    }
    const double establish_var = residual_count > 0 ? residual_sq / residual_count : 0.0;

    DynamicInit init;
    init.pose = VehicleState(track.last_point.x(), track.last_point.y(), fit->heading);
    const double position_var =
        std::max({establish_var, fit->perp_variance, config_.position_var_floor});
    const double heading_var = std::max(fit->heading_variance, config_.heading_var_floor);
    init.covariance = Eigen::Vector3d(position_var, position_var, heading_var).asDiagonal();
    init.timestamp = track.last_point_time > 0.0 ? track.last_point_time : timestamp;
    init.y_sign = track.y_sign;
    out.dynamic_inits[id] = init;
  }
  return out;
}

}  // namespace rocl
