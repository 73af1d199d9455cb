#include "rocl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rocl {
namespace {

using nlohmann::json;

TrajectorySpec::Type trajectory_type(const std::string& name) {
  if (name == "hold") return TrajectorySpec::Type::kHold;
  if (name == "waypoints") return TrajectorySpec::Type::kWaypoints;
  if (name == "lawnmower") return TrajectorySpec::Type::kLawnmower;
  if (name == "random_waypoint") return TrajectorySpec::Type::kRandomWaypoint;
  if (name == "scripted") return TrajectorySpec::Type::kScripted;
  throw std::invalid_argument("scenario: unknown trajectory type '" + name + "'");
}

TrajectorySpec parse_trajectory(const json& j) {
  TrajectorySpec spec;
  spec.type = trajectory_type(j.value("type", "hold"));
  spec.speed = j.value("speed", spec.speed);
  spec.turn_gain = j.value("turn_gain", spec.turn_gain);
  spec.max_turn_rate = j.value("max_turn_rate", spec.max_turn_rate);
  spec.capture_radius = j.value("capture_radius", spec.capture_radius);
  spec.margin = j.value("margin", spec.margin);
  spec.row_spacing = j.value("row_spacing", spec.row_spacing);
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      spec.waypoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
  }
  if (j.contains("script")) {
    for (const auto& seg : j.at("script")) {
      spec.script.push_back({seg.at("duration").get<double>(), seg.value("v", 0.0),
                             seg.value("omega", 0.0)});
    }
  }
  return spec;
}

Scenario parse(const json& j) {
  Scenario s;
  s.name = j.value("name", "unnamed");
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("arena")) {
    s.arena_width = j.at("arena").value("width", s.arena_width);
    s.arena_height = j.at("arena").value("height", s.arena_height);
  }
  s.motion_rate = j.value("motion_rate", s.motion_rate);

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    s.noise.sigma_v = n.value("sigma_v", 0.0);
    s.noise.sigma_omega = n.value("sigma_omega", 0.0);
    s.noise.sigma_range = n.value("sigma_range", 0.0);
  }
  if (j.contains("tdma")) {
    const auto& t = j.at("tdma");
    s.tdma.frame_rate = t.value("frame_rate", s.tdma.frame_rate);
    s.tdma.drop_probability = t.value("drop_probability", s.tdma.drop_probability);
    s.tdma.quantize = t.value("quantize", s.tdma.quantize);
  }
  if (j.contains("clock")) {
    const auto& c = j.at("clock");
    s.clock.offset_walk_density = c.value("offset_walk_density", s.clock.offset_walk_density);
    s.clock.skew_walk_density = c.value("skew_walk_density", s.clock.skew_walk_density);
    s.clock.initial_offset_std = c.value("initial_offset_std", s.clock.initial_offset_std);
    s.clock.initial_skew_std = c.value("initial_skew_std", s.clock.initial_skew_std);
  }
  if (j.contains("phases")) {
    const auto& p = j.at("phases");
    s.phases.static_init = p.value("static_init", s.phases.static_init);
    s.phases.heading_init = p.value("heading_init", s.phases.heading_init);
    s.phases.run = p.value("run", s.phases.run);
  }
  if (j.contains("init")) {
    const auto& i = j.at("init");
    const std::string mode = i.value("mode", "known_initial");
    if (mode == "motion_induced") {
      s.init_mode = InitMode::kMotionInduced;
    } else if (mode == "known_initial") {
      s.init_mode = InitMode::kKnownInitial;
    } else {
      throw std::invalid_argument("scenario: unknown init mode '" + mode + "'");
    }
    s.init.adjacency_samples = i.value("adjacency_samples", s.init.adjacency_samples);
    s.init.window_size = i.value("window_size", s.init.window_size);
    s.init.min_displacement = i.value("min_displacement", s.init.min_displacement);
    s.init.cruise_speed = i.value("cruise_speed", s.init.cruise_speed);
    if (i.contains("y_sign_hints")) {
      for (const auto& [key, value] : i.at("y_sign_hints").items()) {
        s.y_sign_hints[std::stoi(key)] = value.get<int>();
      }
    }
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    s.estimator.smoothing_window = e.value("smoothing_window", s.estimator.smoothing_window);
    s.estimator.smoothing_decay = e.value("smoothing_decay", s.estimator.smoothing_decay);
    s.estimator.gate_sigma = e.value("gate_sigma", s.estimator.gate_sigma);
  }

  if (!j.contains("vehicles")) {
    throw std::invalid_argument("scenario: missing vehicles array");
  }
  for (const auto& v : j.at("vehicles")) {
    VehicleSpec spec;
    spec.id = v.at("id").get<int>();
    const auto& start = v.at("start");
    spec.start = VehicleState(start.at(0).get<double>(), start.at(1).get<double>(),
                              start.at(2).get<double>());
    spec.is_static = v.value("static", false);
    if (v.contains("trajectory")) {
      spec.trajectory = parse_trajectory(v.at("trajectory"));
    }
    s.vehicles.push_back(std::move(spec));
  }

  std::sort(s.vehicles.begin(), s.vehicles.end(),
            [](const VehicleSpec& a, const VehicleSpec& b) { return a.id < b.id; });
  s.validate();
  return s;
}

}  // namespace

std::vector<int> Scenario::static_ids() const {
  std::vector<int> ids;
  for (const auto& v : vehicles) {
    if (v.is_static) ids.push_back(v.id);
  }
  return ids;
}

std::vector<int> Scenario::dynamic_ids() const {
  std::vector<int> ids;
  for (const auto& v : vehicles) {
    if (!v.is_static) ids.push_back(v.id);
  }
  return ids;
}

const VehicleSpec& Scenario::vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw std::invalid_argument("scenario: unknown vehicle id " + std::to_string(id));
}

void Scenario::validate() const {
  const auto fail = [](const std::string& message) {
    throw std::invalid_argument("scenario: " + message);
  };

  if (vehicles.size() < 3) fail("need at least three vehicles");
  if (!(arena_width > 0.0) || !(arena_height > 0.0)) fail("arena must have positive size");
  if (!(motion_rate > 0.0) || !(tdma.frame_rate > 0.0)) fail("rates must be positive");

  const double frames_per_tick = tdma.frame_rate / motion_rate;
  if (std::abs(frames_per_tick - std::round(frames_per_tick)) > 1e-9 ||
      frames_per_tick < 1.0) {
    fail("frame rate must be an integer multiple of the motion rate");
  }

  std::set<int> seen;
  int num_static = 0;
  for (const auto& v : vehicles) {
    if (!seen.insert(v.id).second) fail("duplicate vehicle id " + std::to_string(v.id));
    if (v.is_static) ++num_static;
    if (v.start.position.x() < 0.0 || v.start.position.x() > arena_width ||
        v.start.position.y() < 0.0 || v.start.position.y() > arena_height) {
      fail("vehicle " + std::to_string(v.id) + " starts outside the arena");
    }
    if (v.trajectory.type == TrajectorySpec::Type::kWaypoints && v.trajectory.waypoints.empty()) {
      fail("vehicle " + std::to_string(v.id) + " has a waypoint trajectory without points");
    }
    if (v.trajectory.type == TrajectorySpec::Type::kScripted) {
      if (v.trajectory.script.empty()) {
        fail("vehicle " + std::to_string(v.id) + " has an empty script");
      }
      for (const auto& seg : v.trajectory.script) {
        if (!(seg.duration > 0.0)) {
          fail("vehicle " + std::to_string(v.id) + " has a script segment without duration");
        }
      }
    }
  }
  if (num_static > 2) fail("at most two static vehicles are supported");

  for (size_t i = 0; i < vehicles.size(); ++i) {
    for (size_t k = i + 1; k < vehicles.size(); ++k) {
      const double separation =
          (vehicles[i].start.position - vehicles[k].start.position).norm();
      if (separation < 0.1) {
        fail("vehicles " + std::to_string(vehicles[i].id) + " and " +
             std::to_string(vehicles[k].id) + " start closer than 0.1 m");
      }
    }
  }

  if (noise.sigma_v < 0.0 || noise.sigma_omega < 0.0 || noise.sigma_range < 0.0) {
    fail("noise levels must be >= 0");
  }
  if (phases.static_init < 0.0 || phases.heading_init < 0.0 || !(phases.run > 0.0)) {
    fail("phase durations must be >= 0 and the run phase positive");
  }
  const double control_dt = 1.0 / motion_rate;
  for (double boundary : {phases.static_init, phases.heading_init, phases.run}) {
    const double ticks = boundary / control_dt;
    if (std::abs(ticks - std::round(ticks)) > 1e-6) {
      fail("phase durations must be whole numbers of motion ticks");
    }
  }

  if (init_mode == InitMode::kMotionInduced) {
    if (num_static != 2) fail("motion-induced startup needs exactly two static vehicles");
    if (!(phases.static_init > 0.0) || !(phases.heading_init > 0.0)) {
      fail("motion-induced startup needs non-empty phases 1 and 2");
    }
    if (y_sign_hints.empty()) fail("motion-induced startup needs at least one y-sign hint");
    const auto dynamic = dynamic_ids();
    for (const auto& [id, sign] : y_sign_hints) {
      if (sign != 1 && sign != -1) fail("y-sign hints must be +1 or -1");
      if (std::find(dynamic.begin(), dynamic.end(), id) == dynamic.end()) {
        fail("y-sign hint for vehicle " + std::to_string(id) + " which is not dynamic");
      }
    }
    const double expected_samples = phases.static_init * tdma.frame_rate;
    if (expected_samples < init.adjacency_samples) {
      fail("phase 1 is too short for the configured adjacency sample count");
    }
  }
  if (dynamic_ids().empty()) fail("need at least one dynamic vehicle");
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario: JSON parse error: ") + e.what());
  }
  return parse(j);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("scenario: cannot open " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

}  // namespace rocl
