#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rocl/observability.hpp"
#include "rocl/scenario.hpp"
#include "rocl/sim.hpp"

namespace {

void print_run(const rocl::RunMetrics& metrics) {
  if (metrics.init_used) {
    const auto& frame = metrics.init_report.frame;
    std::printf("startup frame: anchor %d at (0, 0), anchor %d at (%.4f, 0)%s\n",
                frame.anchor1_id, frame.anchor2_id, frame.anchor2_position.x(),
                frame.reflected ? ", embedding mirrored" : "");
    std::printf("startup refinement: stress %.6g -> %.6g (%s)\n",
                metrics.init_report.refine_initial_cost, metrics.init_report.refine_final_cost,
                metrics.init_report.refine_converged ? "converged" : "iteration cap");
  }
  std::printf("%-9s %14s %14s %14s %14s\n", "vehicle", "pos rmse [m]", "head rmse [rad]",
              "odo-only [m]", "final err [m]");
  for (const auto& [id, value] : metrics.position_rmse) {
    const auto& err = metrics.errors.at(id);
    const double final_err = err.position_error.empty() ? 0.0 : err.position_error.back();
    std::printf("%-9d %14.4f %14.4f %14.4f %14.4f\n", id, value, metrics.heading_rmse.at(id),
                metrics.baseline_position_rmse.at(id), final_err);
  }
  std::printf("%-9s %14.4f %14.4f %14.4f %14.4f\n", "fleet", metrics.fleet_position_rmse,
              metrics.fleet_heading_rmse, metrics.fleet_baseline_position_rmse,
              metrics.final_position_error);
  std::printf("update rows gated: %d, updates skipped: %d, held odometry ticks: %d\n",
              metrics.gated_rows, metrics.skipped_updates, metrics.held_ticks);
}

int run_simulate(const std::string& scenario_path, std::uint64_t seed, bool seed_set, int runs,
                 const std::string& out_dir, bool packet_log) {
  const rocl::Scenario scenario = rocl::load_scenario(scenario_path);

  if (runs > 1) {
    const std::uint64_t first = seed_set ? seed : scenario.seed;
    const auto rows = rocl::run_monte_carlo(scenario, first, runs, out_dir);
    int drift_bounded = 0, beats_baseline = 0, thirds = 0;
    for (const auto& row : rows) {
      if (row.late_to_mid_ratio <= 1.5) ++drift_bounded;
      if (row.final_position_error < row.final_baseline_position_error) ++beats_baseline;
      if (row.thirds_increasing) ++thirds;
    }
    std::printf("%d runs of %s (seeds %llu..%llu)\n", runs, scenario.name.c_str(),
                static_cast<unsigned long long>(first),
                static_cast<unsigned long long>(first + runs - 1));
    std::printf("late/mid error ratio <= 1.5:      %d / %d\n", drift_bounded, runs);
    std::printf("final error below odometry-only:  %d / %d\n", beats_baseline, runs);
    std::printf("error growing over thirds:        %d / %d\n", thirds, runs);
    if (!out_dir.empty()) {
      std::printf("summary table: %s/monte_carlo.csv\n", out_dir.c_str());
    }
    return 0;
  }

  rocl::SimOptions options;
  if (seed_set) options.seed_override = seed;
  options.output_dir = out_dir;
  options.write_packet_log = packet_log;
  const rocl::SimOutput output = rocl::run_scenario(scenario, options);
  print_run(output.metrics);
  for (const auto& path : output.written_files) {
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int run_replay(const std::string& log_path, const std::string& scenario_path,
               const std::string& out_dir) {
  const rocl::Scenario scenario = rocl::load_scenario(scenario_path);
  rocl::SimOptions options;
  options.output_dir = out_dir;
  const rocl::SimOutput output = rocl::replay_scenario(scenario, log_path, options);
  print_run(output.metrics);
  for (const auto& path : output.written_files) {
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int run_observability(const std::string& scenario_path, double at_time, bool show_rref) {
  const rocl::Scenario scenario = rocl::load_scenario(scenario_path);
  const rocl::FleetRankSummary summary = rocl::observability_snapshot(scenario, at_time);
  const auto& report = summary.report;

  std::printf("regime: %s\n", rocl::to_string(report.regime));
  std::printf("matrix: %d rows x %d columns (vehicles", static_cast<int>(summary.entries.rows()),
              static_cast<int>(summary.entries.cols()));
  for (int id : summary.dynamic_ids) std::printf(" %d", id);
  std::printf(")\n");
  std::printf("rank: %d", report.rank);
  if (report.predicted_rank >= 0) {
    std::printf(" (closed form predicts %d)", report.predicted_rank);
  }
  std::printf("\n");
  if (report.full) {
    std::printf("fully observable\n");
  } else {
    std::printf("unobservable directions: %d\n", report.deficiency);
  }
  std::printf("singular values:");
  for (double s : report.singular_values) std::printf(" %.3e", s);
  std::printf("\n");

  if (show_rref) {
    rocl::ObservabilityMatrix m;
    m.entries = summary.entries;
    m.row_labels = summary.row_labels;
    const auto reduced = rocl::rref(m, 1e-9);
    const int nonzero = std::min<int>(report.rank, reduced.entries.rows());
    std::printf("reduced rows:\n");
    for (int r = 0; r < nonzero; ++r) {
      std::printf("  [");
      for (int c = 0; c < reduced.entries.cols(); ++c) {
        std::printf(" %8.4f", reduced.entries(r, c));
      }
      std::printf(" ]\n");
    }
  }
  return 0;
}

int run_init_demo_cmd(const std::string& scenario_path) {
  const rocl::Scenario scenario = rocl::load_scenario(scenario_path);
  const rocl::InitReport report = rocl::run_init_demo(scenario);

  std::printf("frame: anchor %d at (0, 0), anchor %d at (%.4f, 0)%s\n", report.frame.anchor1_id,
              report.frame.anchor2_id, report.frame.anchor2_position.x(),
              report.frame.reflected ? ", embedding mirrored" : "");
  std::printf("refinement: stress %.6g -> %.6g (%s)\n", report.refine_initial_cost,
              report.refine_final_cost, report.refine_converged ? "converged" : "iteration cap");
  std::printf("%-9s %12s %12s %12s %8s\n", "vehicle", "x [m]", "y [m]", "heading [rad]",
              "y sign");
  for (const auto& [id, init] : report.dynamic_inits) {
    std::printf("%-9d %12.4f %12.4f %12.4f %8d\n", id, init.pose.position.x(),
                init.pose.position.y(), init.pose.heading, init.y_sign);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-only collaborative localization simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, log_path;
  std::uint64_t seed = 0;
  int runs = 1;
  double at_time = 0.0;
  bool packet_log = false, show_rref = false;

  auto* simulate = app.add_subcommand("simulate", "Run a scenario end to end");
  simulate->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  auto* seed_opt = simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--runs", runs, "Monte-Carlo repetitions with consecutive seeds")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out", out_dir, "Directory for CSV and gnuplot output");
  simulate->add_flag("--packet-log", packet_log, "Record the radio traffic for replay");

  auto* replay = app.add_subcommand("replay", "Re-run a scenario from a recorded packet log");
  replay->add_option("log", log_path, "packets.log from a previous run")->required();
  replay->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  replay->add_option("--out", out_dir, "Directory for CSV output");

  auto* observability = app.add_subcommand("observability", "Rank analysis of a fleet snapshot");
  observability->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  observability->add_option("--time", at_time, "Evaluation time in seconds");
  observability->add_flag("--rref", show_rref, "Also print the reduced row echelon form");

  auto* init_demo = app.add_subcommand("init-demo", "Run only the startup pipeline");
  init_demo->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return run_simulate(scenario_path, seed, !seed_opt->empty(), runs, out_dir, packet_log);
    }
    if (replay->parsed()) {
      return run_replay(log_path, scenario_path, out_dir);
    }
    if (observability->parsed()) {
      return run_observability(scenario_path, at_time, show_rref);
    }
    if (init_demo->parsed()) {
      return run_init_demo_cmd(scenario_path);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
