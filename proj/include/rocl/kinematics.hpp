#pragma once

#include <Eigen/Core>

namespace rocl {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

// Planar pose of one vehicle in the global frame.
struct VehicleState {
  Eigen::Vector2d position{0.0, 0.0};  // m
  double heading{0.0};                 // rad, kept in (-pi, pi]

  VehicleState() = default;
  VehicleState(double x, double y, double theta);
};

// One wheel-odometry sample: body-frame linear velocity and turn rate.
struct MotionMeasurement {
  int vehicle_id{0};
  double timestamp{0.0};        // s since scenario start
  double linear_velocity{0.0};  // m/s
  double turn_rate{0.0};        // rad/s
};

// Inter-vehicle distance for an unordered vehicle pair.
struct RangeMeasurement {
  int id_a{0};
  int id_b{0};
  double distance{0.0};   // m
  double timestamp{0.0};  // s
};

// Per-sample standard deviations for odometry and ranging noise.
struct NoiseSpec {
  double sigma_v{0.0};      // m/s
  double sigma_omega{0.0};  // rad/s
  double sigma_range{0.0};  // m
};

// Below this |omega * dt| the arc solution degenerates and the straight-line
// limit is used instead.
inline constexpr double kArcThreshold = 1e-8;

// Unicycle step under constant (v, omega) over dt > 0. Follows the circular
// arc of radius v / omega exactly; heading is wrapped after the step.
VehicleState propagate_exact(const VehicleState& state, double v, double omega, double dt);

// Explicit midpoint step over [u0.timestamp, u1.timestamp]: inputs are
// averaged and the translation is evaluated at the mid-interval heading.
// Both samples must come from the same vehicle, with u1 strictly later.
VehicleState propagate_midpoint(const VehicleState& state, const MotionMeasurement& u0,
                                const MotionMeasurement& u1);

// Euclidean distance between two vehicle positions.
double true_range(const VehicleState& a, const VehicleState& b);

}  // namespace rocl
