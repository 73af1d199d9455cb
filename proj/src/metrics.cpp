#include "rocl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace rocl {

VehicleErrorSeries compute_error_series(int id, const std::vector<PoseSample>& estimate,
                                        const std::vector<PoseSample>& truth) {
  if (estimate.size() != truth.size()) {
    throw std::invalid_argument("compute_error_series: series lengths differ");
  }
  VehicleErrorSeries series;
  series.id = id;
  series.t.reserve(estimate.size());
  series.position_error.reserve(estimate.size());
  series.heading_error.reserve(estimate.size());
  for (size_t k = 0; k < estimate.size(); ++k) {
    if (std::abs(estimate[k].t - truth[k].t) > 1e-9) {
      throw std::invalid_argument("compute_error_series: timestamps do not line up");
    }
    series.t.push_back(truth[k].t);
    series.position_error.push_back(
        (estimate[k].pose.position - truth[k].pose.position).norm());
    series.heading_error.push_back(
        std::abs(wrap_angle(estimate[k].pose.heading - truth[k].pose.heading)));
  }
  return series;
}

double rmse(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum / values.size());
}

double rmse_over_fraction(const std::vector<double>& values, double from, double to) {
  if (!(0.0 <= from && from < to && to <= 1.0)) {
    throw std::invalid_argument("rmse_over_fraction: need 0 <= from < to <= 1");
  }
  const size_t begin = static_cast<size_t>(from * values.size());
  const size_t end = static_cast<size_t>(to * values.size());
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (size_t k = begin; k < end; ++k) sum += values[k] * values[k];
  return std::sqrt(sum / (end - begin));
}

bool thirds_strictly_increasing(const std::vector<double>& values) {
  if (values.size() < 3) return false;
  const double first = rmse_over_fraction(values, 0.0, 1.0 / 3.0);
  const double second = rmse_over_fraction(values, 1.0 / 3.0, 2.0 / 3.0);
  const double third = rmse_over_fraction(values, 2.0 / 3.0, 1.0);
  return first < second && second < third;
}

}  // namespace rocl
