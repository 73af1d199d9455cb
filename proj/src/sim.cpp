#include "rocl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>

#include "rocl/errors.hpp"
#include "rocl/estimator.hpp"
#include "rocl/noise.hpp"
#include "rocl/trajectory.hpp"
#include "rocl/uwb_net.hpp"

namespace rocl {
namespace {

namespace fs = std::filesystem;

// Stream seeds are derived from the scenario seed with fixed tags so every
// concern draws independently and replay can rebuild any stream on its own.
constexpr std::uint64_t kMotionTag = 0x6d6f74696f6eULL;
constexpr std::uint64_t kNetworkTag = 0x75776274646dULL;
constexpr std::uint64_t kClockTag = 0x636c6f636b73ULL;
constexpr std::uint64_t kTrajectoryTag = 0x7472616a0000ULL;

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.9g", value);
  return buffer;
}

std::vector<CommandTimeline> build_timelines_for(const Scenario& scenario, std::uint64_t seed) {
  const double control_dt = 1.0 / scenario.motion_rate;
  const double total = scenario.total_duration();
  std::vector<CommandTimeline> timelines;
  for (const auto& v : scenario.vehicles) {
    TimelinePhases phases;
    if (v.is_static) {
      phases.static_until = total;
      phases.straight_until = total;
    } else {
      phases.static_until = scenario.phases.static_init;
      phases.straight_until = scenario.phases.static_init + scenario.phases.heading_init;
    }
    phases.end = total + 2.0 * control_dt;
    phases.cruise_speed = scenario.init.cruise_speed;
    const std::uint64_t traj_seed = seed ^ (kTrajectoryTag + static_cast<std::uint64_t>(v.id));
    timelines.push_back(build_command_timeline(v.start, v.trajectory, phases, control_dt,
                                               scenario.arena_width, scenario.arena_height,
                                               traj_seed));
  }
  return timelines;
}

// Everything one scenario run needs, shared between the live radio path and
// packet-log replay. Odometry samples are always drawn from the scenario seed
// inside begin_frame, so both paths consume the identical stream.
class SimEngine {
 public:
  SimEngine(const Scenario& scenario, std::uint64_t seed)
      : scenario_(scenario), seed_(seed), motion_rng_(seed ^ kMotionTag) {
    for (const auto& v : scenario.vehicles) ids_.push_back(v.id);
    for (size_t i = 0; i < ids_.size(); ++i) index_of_[ids_[i]] = static_cast<int>(i);
    static_ids_ = scenario.static_ids();
    dynamic_ids_ = scenario.dynamic_ids();

    control_dt_ = 1.0 / scenario.motion_rate;
    frame_period_ = 1.0 / scenario.tdma.frame_rate;
    frames_per_tick_ =
        static_cast<int>(std::llround(scenario.tdma.frame_rate / scenario.motion_rate));
    phase1_frames_ = static_cast<std::int64_t>(
        std::llround(scenario.phases.static_init * scenario.tdma.frame_rate));
    phase2_frames_ =
        phase1_frames_ + static_cast<std::int64_t>(std::llround(scenario.phases.heading_init *
                                                                scenario.tdma.frame_rate));
    total_frames_ =
        phase2_frames_ + static_cast<std::int64_t>(std::llround(scenario.phases.run *
                                                                scenario.tdma.frame_rate));

    timelines_ = build_timelines_for(scenario, seed);

    SnifferConfig sniffer_config;
    sniffer_config.frame_period = frame_period_;
    sniffer_config.q_offset = scenario.clock.offset_walk_density;
    sniffer_config.q_skew = scenario.clock.skew_walk_density;
    const double jitter = rx_jitter_std();
    const double quant = scenario.tdma.quantize ? ClockConfig{}.quantization : 0.0;
    sniffer_config.offset_measurement_var =
        std::max((jitter * jitter + quant * quant / 12.0) / 2.0, 1e-24);
    sniffer_ = std::make_unique<Sniffer>(static_cast<int>(ids_.size()), sniffer_config);

    if (scenario.init_mode == InitMode::kMotionInduced) {
      InitConfig config;
      config.adjacency_min_samples = scenario.init.adjacency_samples;
      config.window_size = scenario.init.window_size;
      config.min_displacement = scenario.init.min_displacement;
      config.noise = scenario.noise;
      session_ = std::make_unique<InitSession>(ids_, static_ids_, scenario.y_sign_hints, config);
    }
  }

  double rx_jitter_std() const {
    return scenario_.noise.sigma_range * std::sqrt(2.0) / kSpeedOfLight;
  }

  std::int64_t total_frames() const { return total_frames_; }
  std::int64_t init_frames() const { return phase2_frames_; }

  Eigen::Vector2d position_of(int index, double t) const {
    return timelines_[index].state_at(t).position;
  }

  // Draws this frame's odometry samples (tick frames only). Must run for
  // every frame in order, in both live and replay mode.
  void begin_frame(std::int64_t frame) {
    frame_samples_.clear();
    if (frame % frames_per_tick_ != 0) return;
    const double t = frame * frame_period_;
    for (size_t i = 0; i < ids_.size(); ++i) {
      const auto [v, omega] = timelines_[i].command_at(t);
      MotionMeasurement m;
      m.vehicle_id = ids_[i];
      m.timestamp = t;
      m.linear_velocity = corrupt(v, scenario_.noise.sigma_v, motion_rng_);
      m.turn_rate = corrupt(omega, scenario_.noise.sigma_omega, motion_rng_);
      frame_samples_.push_back(m);
    }
  }

  std::vector<MotionMeasurement> payload_for(int index) const {
    for (const auto& m : frame_samples_) {
      if (m.vehicle_id == ids_[index]) return {m};
    }
    return {};
  }

  void process_frame(std::int64_t frame, const std::vector<Packet>& packets) {
    const double t = frame * frame_period_;

    if (frame == phase1_frames_ && session_ && !session_->coordinates_ready()) {
      session_->establish_coordinates();
    }
    if (frame == phase2_frames_ && !estimator_) {
      start_estimator(t);
    }

    SnifferOutput sniffed = sniffer_->collect(packets, frame);
    for (auto& r : sniffed.ranges) {  // sniffer speaks vehicle indices
      r.id_a = ids_[r.id_a];
      r.id_b = ids_[r.id_b];
    }

    if (frame < phase1_frames_) {
      if (session_) {
        for (const auto& r : sniffed.ranges) session_->feed_static_range(r);
      }
      return;
    }

    if (frame < phase2_frames_) {
      if (session_) {
        for (const auto& r : sniffed.ranges) session_->feed_range(r);
        for (const auto& m : frame_samples_) session_->feed_motion(m);
      }
      return;
    }

    // The tick runs first: this frame's exchanges happen after the tick
    // instant and feed the next one.
    if (frame % frames_per_tick_ == 0) {
      estimator_->tick(frame_samples_, t);
      advance_baseline();
      record(t);
    }
    for (const auto& r : sniffed.ranges) estimator_->push_range(r);
  }

  RunMetrics finish() {
    RunMetrics metrics;
    for (int id : dynamic_ids_) {
      metrics.errors[id] = compute_error_series(id, estimate_series_[id], truth_series_[id]);
      metrics.baseline_errors[id] =
          compute_error_series(id, baseline_series_[id], truth_series_[id]);
      metrics.position_rmse[id] = rmse(metrics.errors[id].position_error);
      metrics.heading_rmse[id] = rmse(metrics.errors[id].heading_error);
      metrics.baseline_position_rmse[id] = rmse(metrics.baseline_errors[id].position_error);
      metrics.baseline_heading_rmse[id] = rmse(metrics.baseline_errors[id].heading_error);
    }

    const size_t ticks =
        metrics.errors.empty() ? 0 : metrics.errors.begin()->second.position_error.size();
    std::vector<double> all_heading, base_position, base_heading;
    const double n = static_cast<double>(dynamic_ids_.size());
    for (size_t k = 0; k < ticks; ++k) {
      double pos = 0.0, head = 0.0, bpos = 0.0, bhead = 0.0;
      for (int id : dynamic_ids_) {
        pos += metrics.errors[id].position_error[k];
        head += metrics.errors[id].heading_error[k];
        bpos += metrics.baseline_errors[id].position_error[k];
        bhead += metrics.baseline_errors[id].heading_error[k];
      }
      metrics.fleet_t.push_back(metrics.errors[dynamic_ids_.front()].t[k]);
      metrics.fleet_position_error.push_back(pos / n);
      all_heading.push_back(head / n);
      base_position.push_back(bpos / n);
      base_heading.push_back(bhead / n);
    }
    metrics.fleet_position_rmse = rmse(metrics.fleet_position_error);
    metrics.fleet_heading_rmse = rmse(all_heading);
    metrics.fleet_baseline_position_rmse = rmse(base_position);
    metrics.fleet_baseline_heading_rmse = rmse(base_heading);
    if (!metrics.fleet_position_error.empty()) {
      metrics.final_position_error = metrics.fleet_position_error.back();
      metrics.final_baseline_position_error = base_position.back();
    }

    if (estimator_) {
      metrics.gated_rows = estimator_->counters().rows_gated;
      metrics.skipped_updates = estimator_->counters().skipped_updates;
      metrics.held_ticks = estimator_->counters().held_ticks;
    }
    if (session_) {
      metrics.init_report = init_report_;
      metrics.init_used = true;
    }
    return metrics;
  }

  const std::map<int, std::vector<PoseSample>>& truth_series() const { return truth_series_; }
  const std::map<int, std::vector<PoseSample>>& estimate_series() const {
    return estimate_series_;
  }
  const std::map<int, std::vector<PoseSample>>& baseline_series() const {
    return baseline_series_;
  }

 private:
  void start_estimator(double t) {
    FleetBelief belief;
    belief.dynamic_ids = dynamic_ids_;
    belief.last_update_time = t;
    const int dim = 3 * static_cast<int>(dynamic_ids_.size());

    if (session_) {
      init_report_ = session_->finish(t);
      belief.covariance = Eigen::MatrixXd::Zero(dim, dim);
      int block = 0;
      for (int id : dynamic_ids_) {
        const DynamicInit& init = init_report_.dynamic_inits.at(id);
        belief.nominal.push_back(init.pose);
        belief.covariance.block<3, 3>(3 * block, 3 * block) = init.covariance;
        ++block;
      }
      belief.static_anchors[init_report_.frame.anchor1_id] = init_report_.frame.anchor1_position;
      belief.static_anchors[init_report_.frame.anchor2_id] = init_report_.frame.anchor2_position;

      // The filter runs in the established frame; metrics compare against
      // world-frame truth, so keep the true rigid transform between them.
      const Eigen::Vector2d a1 =
          timelines_[index_of_.at(init_report_.frame.anchor1_id)].state_at(t).position;
      const Eigen::Vector2d a2 =
          timelines_[index_of_.at(init_report_.frame.anchor2_id)].state_at(t).position;
      frame_rotation_ = std::atan2(a2.y() - a1.y(), a2.x() - a1.x());
      frame_origin_ = a1;
    } else {
      belief.covariance = 1e-4 * Eigen::MatrixXd::Identity(dim, dim);
      for (int id : dynamic_ids_) {
        belief.nominal.push_back(timelines_[index_of_.at(id)].state_at(t));
      }
      for (int id : static_ids_) {
        belief.static_anchors[id] = timelines_[index_of_.at(id)].state_at(t).position;
      }
    }

    ProcessNoiseSpec noise;
    noise.dt = control_dt_;
    for (int id : dynamic_ids_) noise.per_vehicle[id] = scenario_.noise;

    EstimatorConfig config;
    config.smoothing_window = scenario_.estimator.smoothing_window;
    config.smoothing_decay = scenario_.estimator.smoothing_decay;
    config.gate_sigma = scenario_.estimator.gate_sigma;
    config.sigma_range = scenario_.noise.sigma_range;
    config.range_staleness = 3.0 * frame_period_;

    estimator_ = std::make_unique<FleetEstimator>(std::move(belief), std::move(noise), config);

    for (int id : dynamic_ids_) {
      baseline_state_[id] = timelines_[index_of_.at(id)].state_at(t);
    }
  }

  void advance_baseline() {
    for (const auto& m : frame_samples_) {
      if (!baseline_state_.count(m.vehicle_id)) continue;
      const auto previous = baseline_last_.find(m.vehicle_id);
      if (previous != baseline_last_.end()) {
        baseline_state_[m.vehicle_id] =
            propagate_midpoint(baseline_state_[m.vehicle_id], previous->second, m);
      }
      baseline_last_[m.vehicle_id] = m;
    }
  }

  VehicleState to_world(const VehicleState& s) const {
    const double c = std::cos(frame_rotation_), sn = std::sin(frame_rotation_);
    return VehicleState(frame_origin_.x() + c * s.position.x() - sn * s.position.y(),
                        frame_origin_.y() + sn * s.position.x() + c * s.position.y(),
                        wrap_angle(s.heading + frame_rotation_));
  }

  void record(double t) {
    const FleetBelief& belief = estimator_->belief();
    for (int id : dynamic_ids_) {
      truth_series_[id].push_back({t, timelines_[index_of_.at(id)].state_at(t)});
      estimate_series_[id].push_back({t, to_world(belief.state_of(id))});
      baseline_series_[id].push_back({t, baseline_state_.at(id)});
    }
  }

  const Scenario& scenario_;
  std::uint64_t seed_;
  NoiseStream motion_rng_;

  std::vector<int> ids_;
  std::map<int, int> index_of_;
  std::vector<int> static_ids_;
  std::vector<int> dynamic_ids_;

  double control_dt_{0.05};
  double frame_period_{0.01};
  int frames_per_tick_{5};
  std::int64_t phase1_frames_{0};
  std::int64_t phase2_frames_{0};
  std::int64_t total_frames_{0};

  std::vector<CommandTimeline> timelines_;
  std::unique_ptr<Sniffer> sniffer_;
  std::unique_ptr<InitSession> session_;
  std::unique_ptr<FleetEstimator> estimator_;
  InitReport init_report_;
  double frame_rotation_{0.0};
  Eigen::Vector2d frame_origin_{0.0, 0.0};

  std::vector<MotionMeasurement> frame_samples_;
  std::map<int, VehicleState> baseline_state_;
  std::map<int, MotionMeasurement> baseline_last_;

  std::map<int, std::vector<PoseSample>> truth_series_;
  std::map<int, std::vector<PoseSample>> estimate_series_;
  std::map<int, std::vector<PoseSample>> baseline_series_;
};

UwbNetwork make_network(const Scenario& scenario, const SimEngine& engine, std::uint64_t seed) {
  const int n = static_cast<int>(scenario.vehicles.size());
  ClockConfig clock_config;
  clock_config.offset_walk_density = scenario.clock.offset_walk_density;
  clock_config.skew_walk_density = scenario.clock.skew_walk_density;
  if (!scenario.tdma.quantize) clock_config.quantization = 0.0;

  ChannelConfig channel;
  channel.drop_probability = scenario.tdma.drop_probability;
  channel.rx_jitter_std = engine.rx_jitter_std();

  UwbNetwork network(make_round_robin_schedule(n, scenario.tdma.frame_rate), clock_config,
                     channel, seed ^ kNetworkTag);

  NoiseStream clock_rng(seed ^ kClockTag);
  for (int i = 0; i < n; ++i) {
    ClockState state;
    state.offset = clock_rng.gaussian(scenario.clock.initial_offset_std);
    state.skew = clock_rng.gaussian(scenario.clock.initial_skew_std);
    network.set_initial_clock(i, state);
  }
  return network;
}

void write_csv_outputs(const SimEngine& engine, const RunMetrics& metrics,
                       const std::string& dir, std::vector<std::string>& written) {
  fs::create_directories(dir);

  for (const auto& [id, truth] : engine.truth_series()) {
    const auto& est = engine.estimate_series().at(id);
    const auto& base = engine.baseline_series().at(id);
    const std::string path = dir + "/trajectory_" + std::to_string(id) + ".csv";
    std::ofstream out(path);
    out << "t,true_x,true_y,true_theta,est_x,est_y,est_theta,base_x,base_y,base_theta\n";
    for (size_t k = 0; k < truth.size(); ++k) {
      out << format_double(truth[k].t) << ',' << format_double(truth[k].pose.position.x())
          << ',' << format_double(truth[k].pose.position.y()) << ','
          << format_double(truth[k].pose.heading) << ','
          << format_double(est[k].pose.position.x()) << ','
          << format_double(est[k].pose.position.y()) << ','
          << format_double(est[k].pose.heading) << ','
          << format_double(base[k].pose.position.x()) << ','
          << format_double(base[k].pose.position.y()) << ','
          << format_double(base[k].pose.heading) << '\n';
    }
    written.push_back(path);
  }

  {
    const std::string path = dir + "/errors.csv";
    std::ofstream out(path);
    out << "t";
    for (const auto& [id, series] : metrics.errors) {
      out << ",pos_" << id << ",head_" << id << ",base_pos_" << id;
    }
    out << ",fleet_pos\n";
    const size_t ticks =
        metrics.errors.empty() ? 0 : metrics.errors.begin()->second.position_error.size();
    for (size_t k = 0; k < ticks; ++k) {
      out << format_double(metrics.errors.begin()->second.t[k]);
      for (const auto& [id, series] : metrics.errors) {
        out << ',' << format_double(series.position_error[k]) << ','
            << format_double(series.heading_error[k]) << ','
            << format_double(metrics.baseline_errors.at(id).position_error[k]);
      }
      out << ',' << format_double(metrics.fleet_position_error[k]) << '\n';
    }
    written.push_back(path);
  }

  {
    const std::string path = dir + "/summary.csv";
    std::ofstream out(path);
    out << "vehicle,position_rmse,heading_rmse,baseline_position_rmse,baseline_heading_rmse,"
           "final_position_error,final_baseline_position_error,gated_rows,skipped_updates,"
           "held_ticks\n";
    for (const auto& [id, value] : metrics.position_rmse) {
      const auto& err = metrics.errors.at(id);
      const double final_err = err.position_error.empty() ? 0.0 : err.position_error.back();
      const auto& base_err = metrics.baseline_errors.at(id);
      const double final_base =
          base_err.position_error.empty() ? 0.0 : base_err.position_error.back();
      out << id << ',' << format_double(value) << ','
          << format_double(metrics.heading_rmse.at(id)) << ','
          << format_double(metrics.baseline_position_rmse.at(id)) << ','
          << format_double(metrics.baseline_heading_rmse.at(id)) << ','
          << format_double(final_err) << ',' << format_double(final_base) << ",,,\n";
    }
    out << "fleet," << format_double(metrics.fleet_position_rmse) << ','
        << format_double(metrics.fleet_heading_rmse) << ','
        << format_double(metrics.fleet_baseline_position_rmse) << ','
        << format_double(metrics.fleet_baseline_heading_rmse) << ','
        << format_double(metrics.final_position_error) << ','
        << format_double(metrics.final_baseline_position_error) << ','
        << metrics.gated_rows << ',' << metrics.skipped_updates << ',' << metrics.held_ticks
        << '\n';
    written.push_back(path);
  }

  {
    const std::string path = dir + "/plot.gp";
    std::ofstream out(path);
    out << "set datafile separator ','\n"
        << "set key outside\n"
        << "set size ratio -1\n"
        << "set xlabel 'x [m]'\nset ylabel 'y [m]'\n"
        << "plot ";
    bool first = true;
    for (const auto& [id, series] : engine.truth_series()) {
      if (!first) out << ", \\\n     ";
      out << "'trajectory_" << id << ".csv' using 2:3 with lines title 'true " << id << "', "
          << "'trajectory_" << id << ".csv' using 5:6 with lines dashtype 2 title 'est " << id
          << "'";
      first = false;
    }
    out << "\npause -1\n\n";
    out << "set size noratio\nset xlabel 't [s]'\nset ylabel 'position error [m]'\n";
    out << "plot ";
    int column = 2;
    first = true;
    for (const auto& [id, series] : metrics.errors) {
      if (!first) out << ", \\\n     ";
      out << "'errors.csv' using 1:" << column << " with lines title 'vehicle " << id << "'";
      column += 3;
      first = false;
    }
    out << ", \\\n     'errors.csv' using 1:" << column
        << " with lines lw 2 title 'fleet mean'\npause -1\n";
    written.push_back(path);
  }
}

SimOutput run_common(const Scenario& scenario, const SimOptions& options,
                     const std::vector<std::vector<Packet>>* replay_frames,
                     bool stop_after_init) {
  const std::uint64_t seed = options.seed_override.value_or(scenario.seed);
  SimEngine engine(scenario, seed);

  std::ofstream packet_log;
  std::vector<std::string> written;
  if (!options.output_dir.empty()) {
    fs::create_directories(options.output_dir);
  }
  if (options.write_packet_log && !options.output_dir.empty() && !replay_frames) {
    const std::string path = options.output_dir + "/packets.log";
    packet_log.open(path);
    written.push_back(path);
  }

  std::optional<UwbNetwork> network;
  if (!replay_frames) {
    network.emplace(make_network(scenario, engine, seed));
  }

  const std::int64_t end_frame =
      stop_after_init ? engine.init_frames() + 1 : engine.total_frames();
  if (replay_frames && static_cast<std::int64_t>(replay_frames->size()) < end_frame) {
    throw std::invalid_argument("replay: packet log is shorter than the scenario");
  }

  for (std::int64_t frame = 0; frame < end_frame; ++frame) {
    engine.begin_frame(frame);
    std::vector<Packet> packets;
    if (replay_frames) {
      packets = (*replay_frames)[frame];
      if (!packets.empty() && packets.front().frame_index != frame) {
        throw std::invalid_argument("replay: packet log frames out of order");
      }
    } else {
      packets = network->run_frame(
          frame, [&](int index, double t) { return engine.position_of(index, t); },
          [&](int sender) { return engine.payload_for(sender); });
      if (packet_log.is_open()) {
        write_packet_log(packet_log, packets);
      }
    }
    engine.process_frame(frame, packets);
  }

  SimOutput output;
  output.metrics = engine.finish();
  if (!options.output_dir.empty() && !stop_after_init) {
    write_csv_outputs(engine, output.metrics, options.output_dir, written);
  }
  output.written_files = std::move(written);
  return output;
}

}  // namespace

SimOutput run_scenario(const Scenario& scenario, const SimOptions& options) {
  return run_common(scenario, options, nullptr, false);
}

SimOutput replay_scenario(const Scenario& scenario, const std::string& packet_log_path,
                          const SimOptions& options) {
  std::ifstream in(packet_log_path);
  if (!in) {
    throw std::invalid_argument("replay: cannot open " + packet_log_path);
  }
  const auto frames = read_packet_log(in);
  return run_common(scenario, options, &frames, false);
}

InitReport run_init_demo(const Scenario& scenario) {
  if (scenario.init_mode != InitMode::kMotionInduced) {
    throw std::invalid_argument("init-demo: scenario does not use motion-induced startup");
  }
  SimOptions options;
  const SimOutput output = run_common(scenario, options, nullptr, true);
  return output.metrics.init_report;
}

FleetRankSummary observability_snapshot(const Scenario& scenario, double at_time) {
  if (at_time < 0.0 || at_time > scenario.total_duration()) {
    throw std::invalid_argument("observability: time lies outside the scenario");
  }
  const auto timelines = build_timelines_for(scenario, scenario.seed);

  std::vector<VehicleState> states;
  std::set<int> static_set;
  std::vector<std::pair<int, int>> edges;
  for (size_t i = 0; i < scenario.vehicles.size(); ++i) {
    states.push_back(timelines[i].state_at(at_time));
    if (scenario.vehicles[i].is_static) static_set.insert(static_cast<int>(i));
    for (size_t j = i + 1; j < scenario.vehicles.size(); ++j) {
      edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }

  const ObservabilityMatrix m = fleet_matrix(states, static_set, edges);
  FleetRankSummary summary;
  summary.report = numerical_rank(m);
  summary.row_labels = m.row_labels;
  summary.entries = m.entries;
  for (int index : m.dynamic_indices) {
    summary.dynamic_ids.push_back(scenario.vehicles[index].id);
  }
  return summary;
}

RunSummaryRow summarize_run(const RunMetrics& metrics, std::uint64_t seed) {
  RunSummaryRow row;
  row.seed = seed;
  row.fleet_position_rmse = metrics.fleet_position_rmse;
  row.fleet_heading_rmse = metrics.fleet_heading_rmse;
  row.fleet_baseline_position_rmse = metrics.fleet_baseline_position_rmse;
  row.final_position_error = metrics.final_position_error;
  row.final_baseline_position_error = metrics.final_baseline_position_error;
  const double mid = rmse_over_fraction(metrics.fleet_position_error, 0.4, 0.6);
  const double late = rmse_over_fraction(metrics.fleet_position_error, 0.8, 1.0);
  row.late_to_mid_ratio = mid > 0.0 ? late / mid : 0.0;
  row.thirds_increasing = thirds_strictly_increasing(metrics.fleet_position_error);
  row.gated_rows = metrics.gated_rows;
  row.skipped_updates = metrics.skipped_updates;
  return row;
}

std::vector<RunSummaryRow> run_monte_carlo(const Scenario& scenario, std::uint64_t first_seed,
                                           int runs, const std::string& output_dir) {
  if (runs < 1) {
    throw std::invalid_argument("run_monte_carlo: need at least one run");
  }
  std::vector<RunSummaryRow> rows;
  for (int k = 0; k < runs; ++k) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(k);
    SimOptions options;
    options.seed_override = seed;
    if (!output_dir.empty()) {
      options.output_dir = output_dir + "/run_" + std::to_string(seed);
    }
    const SimOutput output = run_scenario(scenario, options);
    rows.push_back(summarize_run(output.metrics, seed));
  }

  if (!output_dir.empty()) {
    fs::create_directories(output_dir);
    std::ofstream out(output_dir + "/monte_carlo.csv");
    out << "seed,fleet_position_rmse,fleet_heading_rmse,fleet_baseline_position_rmse,"
           "final_position_error,final_baseline_position_error,late_to_mid_ratio,"
           "thirds_increasing,gated_rows,skipped_updates\n";
    for (const auto& row : rows) {
      out << row.seed << ',' << format_double(row.fleet_position_rmse) << ','
          << format_double(row.fleet_heading_rmse) << ','
          << format_double(row.fleet_baseline_position_rmse) << ','
          << format_double(row.final_position_error) << ','
          << format_double(row.final_baseline_position_error) << ','
          << format_double(row.late_to_mid_ratio) << ',' << (row.thirds_increasing ? 1 : 0)
          << ',' << row.gated_rows << ',' << row.skipped_updates << '\n';
    }
  }
  return rows;
}

}  // namespace rocl
