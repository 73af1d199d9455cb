#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rocl/kinematics.hpp"
#include "rocl/trajectory.hpp"

namespace rocl {

struct VehicleSpec {
  int id{0};
  VehicleState start;
  bool is_static{false};
  TrajectorySpec trajectory;
};

// Durations of the three run phases, in seconds. Phases 1 and 2 may be zero
// when the filter starts from known poses.
struct PhaseConfig {
  double static_init{2.0};
  double heading_init{4.0};
  double run{300.0};
};

enum class InitMode {
  kMotionInduced,  // full startup pipeline against two static vehicles
  kKnownInitial,   // filter seeded from the true poses at the run start
};

struct TdmaScenarioConfig {
  double frame_rate{100.0};
  double drop_probability{0.0};
  bool quantize{true};
};

struct ClockScenarioConfig {
  double offset_walk_density{1e-21};
  double skew_walk_density{1e-23};
  double initial_offset_std{1e-6};  // s
  double initial_skew_std{1e-5};    // dimensionless
};

struct EstimatorScenarioConfig {
  int smoothing_window{5};
  double smoothing_decay{0.7};
  double gate_sigma{6.0};
};

struct InitScenarioConfig {
  int adjacency_samples{50};
  int window_size{20};
  double min_displacement{0.2};
  double cruise_speed{0.5};  // m/s commanded during the straight-line phase
};

struct Scenario {
  std::string name;
  std::uint64_t seed{1};
  double arena_width{12.0};
  double arena_height{12.0};
  double motion_rate{20.0};  // odometry samples per second
  std::vector<VehicleSpec> vehicles;
  NoiseSpec noise;
  TdmaScenarioConfig tdma;
  ClockScenarioConfig clock;
  PhaseConfig phases;
  InitMode init_mode{InitMode::kKnownInitial};
  std::map<int, int> y_sign_hints;  // vehicle id -> expected sign during startup
  InitScenarioConfig init;
  EstimatorScenarioConfig estimator;

  std::vector<int> static_ids() const;
  std::vector<int> dynamic_ids() const;
  const VehicleSpec& vehicle(int id) const;
  double total_duration() const { return phases.static_init + phases.heading_init + phases.run; }

  // Throws std::invalid_argument with a readable message on any violation.
  void validate() const;
};

// Parses and validates a scenario from a JSON file.
Scenario load_scenario(const std::string& path);

// Same, from a JSON string (used by tests).
Scenario parse_scenario(const std::string& json_text);

}  // namespace rocl
