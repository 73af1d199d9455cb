#include "rocl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rocl/noise.hpp"

namespace rocl {
namespace {

// Steers toward the active waypoint; advances it inside the capture radius.
struct WaypointFollower {
  std::vector<Eigen::Vector2d> waypoints;
  size_t active{0};

  std::pair<double, double> command(const VehicleState& state, const TrajectorySpec& spec) {
    if (waypoints.empty()) return {0.0, 0.0};
    if ((waypoints[active] - state.position).norm() < spec.capture_radius) {
      active = (active + 1) % waypoints.size();
    }
    const Eigen::Vector2d to_target = waypoints[active] - state.position;
    const double bearing = std::atan2(to_target.y(), to_target.x());
    const double error = wrap_angle(bearing - state.heading);
    const double omega =
        std::clamp(spec.turn_gain * error, -spec.max_turn_rate, spec.max_turn_rate);
    // Slow down while pointing far off target so turns stay tight.
    const double v = spec.speed * (std::abs(error) > kPi / 2 ? 0.2 : 1.0);
    return {v, omega};
  }
};

std::vector<Eigen::Vector2d> lawnmower_rows(double width, double height, double margin,
                                            double spacing) {
  std::vector<Eigen::Vector2d> points;
  const double x0 = margin;
  const double x1 = width - margin;
  bool left_to_right = true;
  for (double y = margin; y <= height - margin + 1e-9; y += spacing) {
    if (left_to_right) {
      points.emplace_back(x0, y);
      points.emplace_back(x1, y);
    } else {
      points.emplace_back(x1, y);
      points.emplace_back(x0, y);
    }
    left_to_right = !left_to_right;
  }
  return points;
}

}  // namespace

CommandTimeline::CommandTimeline(VehicleState start, double control_dt) : dt_(control_dt) {
  if (!(control_dt > 0.0)) {
    throw std::invalid_argument("CommandTimeline: control period must be positive");
  }
  knots_.push_back(start);
}

void CommandTimeline::append(double v, double omega) {
  commands_.emplace_back(v, omega);
  if (v == 0.0 && omega == 0.0) {
    knots_.push_back(knots_.back());  // propagate_exact requires dt > 0 anyway
  } else {
    knots_.push_back(propagate_exact(knots_.back(), v, omega, dt_));
  }
}

VehicleState CommandTimeline::state_at(double t) const {
  if (t < 0.0 || t > duration() + 1e-9) {
    throw std::out_of_range("CommandTimeline: time outside the timeline");
  }
  const int k = std::min(static_cast<int>(t / dt_), num_ticks());
  const double remainder = t - k * dt_;
  if (k >= num_ticks() || remainder <= 1e-12) return knots_[k];
  const auto [v, omega] = commands_[k];
  if (v == 0.0 && omega == 0.0) return knots_[k];
  return propagate_exact(knots_[k], v, omega, remainder);
}

std::pair<double, double> CommandTimeline::command_at(double t) const {
  if (t < 0.0 || t > duration() + 1e-9) {
    throw std::out_of_range("CommandTimeline: time outside the timeline");
  }
  const int k = std::min(static_cast<int>(t / dt_), num_ticks() - 1);
  return commands_.at(k);
}

CommandTimeline build_command_timeline(const VehicleState& start, const TrajectorySpec& spec,
                                       const TimelinePhases& phases, double control_dt,
                                       double arena_width, double arena_height,
                                       std::uint64_t seed) {
  CommandTimeline timeline(start, control_dt);
  const int total_ticks = static_cast<int>(std::llround(phases.end / control_dt));

  WaypointFollower follower;
  switch (spec.type) {
    case TrajectorySpec::Type::kWaypoints:
      follower.waypoints = spec.waypoints;
      break;
    case TrajectorySpec::Type::kLawnmower:
      follower.waypoints = lawnmower_rows(arena_width, arena_height, spec.margin,
                                          spec.row_spacing);
      break;
    default:
      break;
  }
  NoiseStream waypoint_rng(seed);
  if (spec.type == TrajectorySpec::Type::kRandomWaypoint) {
    follower.waypoints.emplace_back(
        waypoint_rng.uniform(spec.margin, arena_width - spec.margin),
        waypoint_rng.uniform(spec.margin, arena_height - spec.margin));
  }

  double script_clock = 0.0;
  size_t script_index = 0;

  for (int k = 0; k < total_ticks; ++k) {
    const double t = k * control_dt;
    double v = 0.0;
    double omega = 0.0;

    if (t < phases.static_until - 1e-9) {
      // hold
    } else if (t < phases.straight_until - 1e-9) {
      v = phases.cruise_speed;
    } else {
      const VehicleState& state = timeline.knot(k);
      switch (spec.type) {
        case TrajectorySpec::Type::kHold:
          break;
        case TrajectorySpec::Type::kWaypoints:
        case TrajectorySpec::Type::kLawnmower:
          std::tie(v, omega) = follower.command(state, spec);
          break;
        case TrajectorySpec::Type::kRandomWaypoint: {
          if ((follower.waypoints[follower.active] - state.position).norm() <
              spec.capture_radius) {
            follower.waypoints[follower.active] =
                Eigen::Vector2d(waypoint_rng.uniform(spec.margin, arena_width - spec.margin),
                                waypoint_rng.uniform(spec.margin, arena_height - spec.margin));
          }
          std::tie(v, omega) = follower.command(state, spec);
          break;
        }
        case TrajectorySpec::Type::kScripted: {
          if (!spec.script.empty()) {
            while (script_clock >= spec.script[script_index].duration - 1e-9) {
              script_clock -= spec.script[script_index].duration;
              script_index = (script_index + 1) % spec.script.size();
            }
            v = spec.script[script_index].v;
            omega = spec.script[script_index].omega;
            script_clock += control_dt;
          }
          break;
        }
      }
    }
    timeline.append(v, omega);
  }
  return timeline;
}

}  // namespace rocl
