#pragma once

#include <Eigen/Core>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "rocl/kinematics.hpp"

namespace rocl {

// Symmetric inter-vehicle distance matrix with a per-pair validity mask.
// Diagonal is zero; off-diagonal entries are averages over the accumulated
// samples, symmetrized across the two directions of each pair.
struct AdjacencyMatrix {
  Eigen::MatrixXd distances;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;

  int size() const { return static_cast<int>(distances.rows()); }
  bool complete() const;
};

// Accumulates ranging samples while the fleet holds still and averages them
// into an AdjacencyMatrix.
class AdjacencyAccumulator {
 public:
  explicit AdjacencyAccumulator(int num_vehicles);

  void add(int i, int j, double distance);
  int pair_count(int i, int j) const;
  // Smallest sample count over all unordered pairs; 0 while any pair is unseen.
  int min_pair_count() const;
  AdjacencyMatrix build() const;

 private:
  int n_;
  Eigen::MatrixXd sums_;
  Eigen::MatrixXi counts_;
};

// Plants N points in the plane whose distances reproduce D in the
// least-squares sense: double-centers the squared distances and keeps the two
// dominant eigenpairs. The embedding is arbitrary up to rotation,
// translation, and reflection. Throws DegenerateConfigError when the second
// eigenvalue is not positive (collinear or noise-dominated geometry).
std::vector<Eigen::Vector2d> classical_mds(const AdjacencyMatrix& d);

// Record of the local frame the fleet was initialized in: anchor1 pinned at
// the origin, anchor2 on the positive x-axis.
struct FrameFix {
  int anchor1_id{-1};
  int anchor2_id{-1};
  Eigen::Vector2d anchor1_position{0.0, 0.0};
  Eigen::Vector2d anchor2_position{0.0, 0.0};
  bool reflected{false};  // embedding was mirrored to honor the sign hints
};

struct GaugeResult {
  std::vector<Eigen::Vector2d> points;
  FrameFix frame;
};

// Moves anchor1 to the origin, rotates anchor2 onto the positive x-axis, and
// resolves the reflection ambiguity with reference_signs: a map from point
// index to the expected sign of its y coordinate. Points near the axis
// contribute proportionally less to the reflection vote.
GaugeResult fix_gauge(const std::vector<Eigen::Vector2d>& points, int anchor1, int anchor2,
                      const std::map<int, int>& reference_signs = {});

struct RefineOptions {
  int max_iterations{200};
  double cost_decrease_tol{1e-10};
};

struct RefineResult {
  std::vector<Eigen::Vector2d> points;
  double initial_cost{0.0};
  double final_cost{0.0};
  int iterations{0};
  bool converged{false};
};

// Sum of squared distance residuals over the valid unordered pairs of D.
double stress_cost(const std::vector<Eigen::Vector2d>& points, const AdjacencyMatrix& d);

// Gauss-Newton descent on stress_cost with backtracking line search. The
// gauge coordinates (anchor1 x/y, anchor2 y) stay pinned. Stops when the
// per-iteration cost decrease falls below cost_decrease_tol; on hitting the
// iteration cap the best iterate is returned with converged = false.
RefineResult refine_positions(const std::vector<Eigen::Vector2d>& points,
                              const AdjacencyMatrix& d, const FrameFix& frame,
                              const RefineOptions& options = {});

// Rolling window of motion samples for one vehicle, with the mean-square
// energies the straight-line detector thresholds against.
class LinearMotionWindow {
 public:
  LinearMotionWindow(int window_size, double gamma_omega, double gamma_v);

  void push(const MotionMeasurement& m);
  bool full() const;
  double turn_rate_energy() const;
  double velocity_energy() const;
  double gamma_omega() const { return gamma_omega_; }
  double gamma_v() const { return gamma_v_; }

 private:
  int window_size_;
  double gamma_omega_;
  double gamma_v_;
  std::deque<MotionMeasurement> samples_;
};

// True when the window is full, the turn-rate energy stays below gamma_omega,
// and the velocity energy exceeds gamma_v: the vehicle is driving straight.
bool detect_linear_motion(const LinearMotionWindow& w);

// Position from two anchor distances: anchor1 at the origin, anchor2 at
// (baseline, 0), with y_sign (+1 / -1) choosing the half-plane. The interior
// angle at anchor1 comes from the triangle sides; a cosine overshooting
// [-1, 1] by more than slack raises InconsistentRangesError, smaller
// overshoots are clamped.
Eigen::Vector2d trilaterate(double d1, double d2, double baseline, int y_sign,
                            double slack = 1e-9);

// Total-least-squares line fit through a trilaterated track, directed from
// the first to the last point. Returns nothing until the track spans at
// least min_displacement.
std::optional<double> initial_heading(const std::vector<Eigen::Vector2d>& track,
                                      double min_displacement = 0.2);

struct HeadingFit {
  double heading{0.0};
  double perp_variance{0.0};     // residual variance across the fitted line
  double heading_variance{0.0};  // propagated direction uncertainty
};

// initial_heading plus the residual statistics the filter seeds from.
std::optional<HeadingFit> fit_track_heading(const std::vector<Eigen::Vector2d>& track,
                                            double min_displacement = 0.2);

struct InitConfig {
  int adjacency_min_samples{50};  // ranging samples per pair before embedding
  int window_size{20};            // motion samples per detector window
  double gamma_omega{0.0};        // 0 derives 9 * sigma_omega^2
  double gamma_v{0.0};            // 0 derives max(9 * sigma_v^2, 0.01)
  double min_displacement{0.2};   // m of straight travel before heading fit
  double cos_slack{0.1};          // trilateration clamp allowance under noise
  double y_reject_factor{2.0};    // |y| below factor * sigma_range is unusable
  double range_freshness{0.05};   // s; anchor ranges older than this are stale
  double position_var_floor{0.0};     // 0 derives sigma_range^2
  double heading_var_floor{0.0025};   // rad^2
  RefineOptions refine;
  NoiseSpec noise;
};

// Pose handed to the filter for one vehicle that completed the pipeline.
struct DynamicInit {
  VehicleState pose;
  Eigen::Matrix3d covariance{Eigen::Matrix3d::Zero()};
  double timestamp{0.0};
  int y_sign{1};
};

struct InitReport {
  FrameFix frame;
  std::map<int, Eigen::Vector2d> positions;  // establishment position per vehicle id
  std::map<int, DynamicInit> dynamic_inits;
  double refine_initial_cost{0.0};
  double refine_final_cost{0.0};
  bool refine_converged{false};
};

// Drives the full startup sequence: accumulate ranges while everyone holds
// still, embed and refine the fleet layout, then watch each moving vehicle
// for a straight run and fit its heading from the trilaterated track.
class InitSession {
 public:
  InitSession(std::vector<int> vehicle_ids, std::vector<int> static_ids,
              std::map<int, int> y_sign_hints, InitConfig config);

  // Phase 1: ranging while static.
  void feed_static_range(const RangeMeasurement& r);
  bool adjacency_ready() const;
  void establish_coordinates();
  bool coordinates_ready() const { return coordinates_ready_; }

  // Phase 2: straight-line motion.
  void feed_motion(const MotionMeasurement& m);
  void feed_range(const RangeMeasurement& r);
  bool vehicle_ready(int id) const;
  bool all_ready() const;

  // Finalizes the report; throws InitializationError naming the vehicles
  // that never produced a usable heading.
  InitReport finish(double timestamp) const;

 private:
  struct VehicleTrack {
    LinearMotionWindow window;
    std::vector<Eigen::Vector2d> points;
    std::optional<HeadingFit> fit;
    Eigen::Vector2d last_point{0.0, 0.0};
    int y_sign{0};  // 0 until locked
    bool sign_rejected{false};
    double last_point_time{0.0};
  };

  void try_trilaterate(int id, double timestamp);

  std::vector<int> vehicle_ids_;
  std::vector<int> static_ids_;
  std::map<int, int> index_of_;
  std::map<int, int> y_sign_hints_;
  InitConfig config_;

  AdjacencyAccumulator accumulator_;
  bool coordinates_ready_{false};
  InitReport report_;

  std::map<int, VehicleTrack> tracks_;
  // Latest anchor ranges per dynamic vehicle: distance + timestamp.
  std::map<int, std::pair<double, double>> range_to_anchor1_;
  std::map<int, std::pair<double, double>> range_to_anchor2_;
};

}  // namespace rocl
