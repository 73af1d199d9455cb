#include "rocl/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace rocl {

double wrap_angle(double angle) {
  const double r = std::remainder(angle, kTwoPi);
  return r <= -kPi ? r + kTwoPi : r;
}

VehicleState::VehicleState(double x, double y, double theta)
    : position(x, y), heading(wrap_angle(theta)) {}

VehicleState propagate_exact(const VehicleState& state, double v, double omega, double dt) {
  if (!std::isfinite(v) || !std::isfinite(omega) || !std::isfinite(dt) ||
      !state.position.allFinite() || !std::isfinite(state.heading)) {
    throw std::invalid_argument("propagate_exact: non-finite input");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("propagate_exact: dt must be positive");
  }

  VehicleState out = state;
  const double dtheta = omega * dt;
  if (std::abs(dtheta) > kArcThreshold) {
    const double radius = v / omega;
    out.position.x() += radius * (std::sin(state.heading + dtheta) - std::sin(state.heading));
    out.position.y() -= radius * (std::cos(state.heading + dtheta) - std::cos(state.heading));
  } else {
    out.position.x() += v * dt * std::cos(state.heading);
    out.position.y() += v * dt * std::sin(state.heading);
  }
  out.heading = wrap_angle(state.heading + dtheta);
  return out;
}

VehicleState propagate_midpoint(const VehicleState& state, const MotionMeasurement& u0,
                                const MotionMeasurement& u1) {
  if (u0.vehicle_id != u1.vehicle_id) {
    throw std::invalid_argument("propagate_midpoint: samples from different vehicles");
  }
  const double dt = u1.timestamp - u0.timestamp;
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("propagate_midpoint: u1 must be strictly later than u0");
  }

  const double v_mid = 0.5 * (u0.linear_velocity + u1.linear_velocity);
  const double omega_mid = 0.5 * (u0.turn_rate + u1.turn_rate);
  const double theta_mid = state.heading + 0.5 * omega_mid * dt;

  VehicleState out = state;
  out.position.x() += v_mid * dt * std::cos(theta_mid);
  out.position.y() += v_mid * dt * std::sin(theta_mid);
  out.heading = wrap_angle(state.heading + omega_mid * dt);
  return out;
}

double true_range(const VehicleState& a, const VehicleState& b) {
  return (a.position - b.position).norm();
}

}  // namespace rocl
