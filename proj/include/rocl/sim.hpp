#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rocl/initializer.hpp"
#include "rocl/metrics.hpp"
#include "rocl/observability.hpp"
#include "rocl/scenario.hpp"

namespace rocl {

struct SimOptions {
  std::optional<std::uint64_t> seed_override;
  std::string output_dir;        // empty disables file output
  bool write_packet_log{false};  // packets.log inside output_dir
};

struct SimOutput {
  RunMetrics metrics;
  std::vector<std::string> written_files;
};

// Runs one full scenario: radio frames, startup pipeline (or known-pose
// seeding), filter, baseline dead reckoning, metrics, and optional CSV /
// packet-log output. Throws InitializationError when the startup pipeline
// cannot deliver a usable fleet state.
SimOutput run_scenario(const Scenario& scenario, const SimOptions& options = {});

// Re-runs a scenario from a recorded packet log instead of the radio
// simulation. The odometry stream is reconstructed from the scenario seed,
// so the result matches the original run exactly.
SimOutput replay_scenario(const Scenario& scenario, const std::string& packet_log_path,
                          const SimOptions& options = {});

// Runs phases 1 and 2 only and returns the startup report.
InitReport run_init_demo(const Scenario& scenario);

// Observability structure of the fleet evaluated at the true states at
// at_time (seconds into the scenario).
struct FleetRankSummary {
  RankReport report;
  std::vector<int> dynamic_ids;  // scenario ids, column-block order
  std::vector<std::string> row_labels;
  Eigen::MatrixXd entries;
};

FleetRankSummary observability_snapshot(const Scenario& scenario, double at_time = 0.0);

// One row of the Monte-Carlo summary table.
struct RunSummaryRow {
  std::uint64_t seed{0};
  double fleet_position_rmse{0.0};
  double fleet_heading_rmse{0.0};
  double fleet_baseline_position_rmse{0.0};
  double final_position_error{0.0};
  double final_baseline_position_error{0.0};
  double late_to_mid_ratio{0.0};  // last-20% over middle-20% position RMSE
  bool thirds_increasing{false};
  int gated_rows{0};
  int skipped_updates{0};
};

RunSummaryRow summarize_run(const RunMetrics& metrics, std::uint64_t seed);

// Sequential seeded fan-out: seeds first_seed .. first_seed + runs - 1.
// When output_dir is set, per-run artifacts land in run_<seed>/ and the
// merged table in monte_carlo.csv.
std::vector<RunSummaryRow> run_monte_carlo(const Scenario& scenario, std::uint64_t first_seed,
                                           int runs, const std::string& output_dir = "");

}  // namespace rocl
