#pragma once

#include <Eigen/Core>
#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "rocl/kinematics.hpp"

namespace rocl {

// Joint nominal state and error covariance for the moving vehicles, plus the
// anchor positions treated as known constants. Error coordinates are
// (dx, dy, dtheta) per vehicle, stacked in dynamic_ids order.
struct FleetBelief {
  std::vector<int> dynamic_ids;
  std::vector<VehicleState> nominal;
  Eigen::MatrixXd covariance;
  std::map<int, Eigen::Vector2d> static_anchors;
  double last_update_time{0.0};

  int index_of(int vehicle_id) const;  // -1 when the id is not estimated
  int dimension() const { return 3 * static_cast<int>(dynamic_ids.size()); }
  const VehicleState& state_of(int vehicle_id) const;
};

// Per-vehicle odometry noise levels and the nominal tick period.
struct ProcessNoiseSpec {
  std::map<int, NoiseSpec> per_vehicle;
  double dt{0.05};
};

// Jacobian of the midpoint step with respect to one vehicle's error state,
// evaluated at the mid-interval velocity and heading.
Eigen::Matrix3d propagation_jacobian(double v_mid, double theta_mid, double dt);

// Additive process covariance for one vehicle over one tick. The translation
// noise enters along the mid-interval heading, the heading noise directly.
Eigen::Matrix3d propagation_noise(double theta_mid, const NoiseSpec& noise, double dt);

using MotionPair = std::pair<MotionMeasurement, MotionMeasurement>;

// Advances every vehicle's nominal state with the midpoint step and the
// covariance with the block propagation. Each dynamic vehicle needs a sample
// pair spanning exactly noise.dt; a missing pair raises StaleInputError.
FleetBelief propagate(const FleetBelief& belief, const std::map<int, MotionPair>& motions,
                      const ProcessNoiseSpec& noise);

// Weighted average over a short window of range samples for one pair. Weights
// fall off exponentially with age (decay = 1 gives a uniform average); the
// smoothed sample carries the newest timestamp.
class SmoothingQueue {
 public:
  SmoothingQueue() = default;
  SmoothingQueue(int window, double decay);

  RangeMeasurement push(const RangeMeasurement& incoming);
  int size() const { return static_cast<int>(samples_.size()); }

  // Variance of the weighted average relative to one sample's variance
  // (sum w^2 / (sum w)^2 for a full window).
  static double variance_factor(int window, double decay);

 private:
  int window_{5};
  double decay_{0.7};
  std::deque<RangeMeasurement> samples_;
};

// Measurement row for the distance between two vehicles, at least one of
// them estimated. Anchor ids resolve through belief.static_anchors.
Eigen::RowVectorXd range_jacobian_row(const FleetBelief& belief, int id_a, int id_b);

struct UpdateStats {
  int rows_used{0};
  int rows_gated{0};
  int rows_degenerate{0};  // dropped for (near-)coincident predicted positions
  bool skipped{false};     // innovation factorization failed; belief unchanged
};

// Joseph-form correction with all usable range rows stacked into one update.
// Rows whose innovation exceeds gate_sigma standard deviations are dropped
// before the correction is computed.
FleetBelief update(const FleetBelief& belief, const std::vector<RangeMeasurement>& ranges,
                   double sigma_range, double gate_sigma = 6.0, UpdateStats* stats = nullptr);

// propagate followed by update, with timestamp coherence checks.
FleetBelief step(const FleetBelief& belief, const std::map<int, MotionPair>& motions,
                 const std::vector<RangeMeasurement>& ranges, const ProcessNoiseSpec& noise,
                 double sigma_range, double gate_sigma = 6.0, UpdateStats* stats = nullptr);

struct EstimatorConfig {
  int smoothing_window{5};
  double smoothing_decay{0.7};
  double gate_sigma{6.0};
  double sigma_range{0.1};
  int max_hold_ticks{3};          // zero-order hold budget for missing odometry
  double hold_inflation{10.0};    // process noise factor once the budget runs out
  double range_staleness{0.03};   // s; older smoothed ranges sit out the update
};

struct EstimatorCounters {
  int ticks{0};
  int rows_used{0};
  int rows_gated{0};
  int rows_degenerate{0};
  int skipped_updates{0};
  int held_ticks{0};  // vehicle-ticks propagated on held odometry
};

// Stateful tick driver around the functional core: smooths the 100 Hz range
// stream, pairs up consecutive odometry samples, covers dropped samples with
// a zero-order hold, and keeps gating counters for the run summary.
class FleetEstimator {
 public:
  FleetEstimator(FleetBelief initial, ProcessNoiseSpec noise, EstimatorConfig config);

  void push_range(const RangeMeasurement& r);

  // One 20 Hz tick at time t with the fresh odometry samples (possibly
  // missing some vehicles). The first tick only latches samples.
  void tick(const std::vector<MotionMeasurement>& motions, double t);

  const FleetBelief& belief() const { return belief_; }
  const EstimatorCounters& counters() const { return counters_; }

 private:
  // Nominal position of a vehicle (or anchor) at a time within the current
  // hold interval, rolled forward along the held command arc.
  std::optional<Eigen::Vector2d> nominal_position_at(int id, double tau) const;

  FleetBelief belief_;
  ProcessNoiseSpec noise_;
  EstimatorConfig config_;
  EstimatorCounters counters_;

  std::map<int, MotionMeasurement> last_motion_;
  std::map<int, int> hold_count_;
  std::map<std::pair<int, int>, SmoothingQueue> queues_;
  std::map<std::pair<int, int>, RangeMeasurement> smoothed_;
  bool primed_{false};
};

}  // namespace rocl
