#pragma once

#include <map>
#include <vector>

#include "rocl/initializer.hpp"
#include "rocl/kinematics.hpp"

namespace rocl {

struct PoseSample {
  double t{0.0};
  VehicleState pose;
};

// Per-tick estimation errors for one vehicle against the matched truth.
struct VehicleErrorSeries {
  int id{0};
  std::vector<double> t;
  std::vector<double> position_error;  // m
  std::vector<double> heading_error;   // |wrapped| rad
};

// Errors and summary statistics for one scenario run.
struct RunMetrics {
  std::map<int, VehicleErrorSeries> errors;
  std::map<int, VehicleErrorSeries> baseline_errors;  // odometry-only dead reckoning
  std::map<int, double> position_rmse;
  std::map<int, double> heading_rmse;
  std::map<int, double> baseline_position_rmse;
  std::map<int, double> baseline_heading_rmse;
  std::vector<double> fleet_t;
  std::vector<double> fleet_position_error;  // mean over dynamic vehicles, per tick
  double fleet_position_rmse{0.0};
  double fleet_heading_rmse{0.0};
  double fleet_baseline_position_rmse{0.0};
  double fleet_baseline_heading_rmse{0.0};
  double final_position_error{0.0};           // fleet mean at the last tick
  double final_baseline_position_error{0.0};
  int gated_rows{0};
  int skipped_updates{0};
  int held_ticks{0};
  InitReport init_report;
  bool init_used{false};
};

// Matches two sampled pose series tick by tick. Throws when the timestamps
// do not line up.
VehicleErrorSeries compute_error_series(int id, const std::vector<PoseSample>& estimate,
                                        const std::vector<PoseSample>& truth);

double rmse(const std::vector<double>& values);

// RMSE over the fraction window [from, to) of the series, e.g. (0.4, 0.6)
// for the middle fifth.
double rmse_over_fraction(const std::vector<double>& values, double from, double to);

// True when the values over successive thirds of the series have strictly
// increasing RMS: the signature of unbounded drift.
bool thirds_strictly_increasing(const std::vector<double>& values);

}  // namespace rocl
