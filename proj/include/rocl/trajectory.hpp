#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "rocl/kinematics.hpp"

namespace rocl {

struct ScriptSegment {
  double duration{0.0};  // s
  double v{0.0};         // m/s
  double omega{0.0};     // rad/s
};

// How a dynamic vehicle moves during the run phase.
struct TrajectorySpec {
  enum class Type {
    kHold,            // stand still
    kWaypoints,       // follow an explicit waypoint list, looping
    kLawnmower,       // generated boustrophedon rows across the arena
    kRandomWaypoint,  // seeded uniform waypoints inside the arena
    kScripted,        // piecewise-constant (v, omega) segments, looping
  };

  Type type{Type::kHold};
  std::vector<Eigen::Vector2d> waypoints;
  std::vector<ScriptSegment> script;
  double speed{0.5};           // m/s cruise for waypoint modes
  double turn_gain{2.0};       // rad/s per rad of bearing error
  double max_turn_rate{1.2};   // rad/s
  double capture_radius{0.3};  // m
  double margin{1.5};          // m kept from the arena edge in generated modes
  double row_spacing{2.0};     // m between lawnmower rows
};

// Phase layout a command timeline is built against: hold still, then drive
// straight at cruise_speed, then follow the trajectory spec until end.
struct TimelinePhases {
  double static_until{0.0};
  double straight_until{0.0};
  double end{0.0};
  double cruise_speed{0.5};
};

// True motion of one vehicle: piecewise-constant (v, omega) commands at the
// control rate, integrated exactly along arcs between knots. state_at is
// exact for any t because the command is constant within each interval.
class CommandTimeline {
 public:
  CommandTimeline(VehicleState start, double control_dt);

  void append(double v, double omega);

  int num_ticks() const { return static_cast<int>(commands_.size()); }
  double control_dt() const { return dt_; }
  double duration() const { return commands_.size() * dt_; }
  const VehicleState& knot(int k) const { return knots_.at(k); }
  std::pair<double, double> command(int k) const { return commands_.at(k); }

  VehicleState state_at(double t) const;
  std::pair<double, double> command_at(double t) const;

 private:
  double dt_;
  std::vector<std::pair<double, double>> commands_;
  std::vector<VehicleState> knots_;  // knots_[k] at t = k * dt; one more than commands
};

struct VehicleSpec;  // scenario.hpp

// Builds the closed-loop command timeline for one vehicle across all phases.
// The seed only matters for random-waypoint trajectories.
CommandTimeline build_command_timeline(const VehicleState& start, const TrajectorySpec& spec,
                                       const TimelinePhases& phases, double control_dt,
                                       double arena_width, double arena_height,
                                       std::uint64_t seed);

}  // namespace rocl
