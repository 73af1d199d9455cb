#pragma once

#include <Eigen/Core>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rocl/kinematics.hpp"

namespace rocl {

// Fleet composition a rank verdict applies to.
enum class ObservabilityRegime {
  kDynamicOnlyPair,   // two moving vehicles, no anchors
  kDynamicOnlyFleet,  // three or more moving vehicles, no anchors
  kOneAnchor,         // moving vehicles plus one known-position vehicle
  kTwoAnchors,        // moving vehicles plus two (or more) known positions
};

const char* to_string(ObservabilityRegime regime);

// Two vehicles closer than this on a measured edge make the squared-range
// gradients vanish and the matrix meaningless.
inline constexpr double kCoincidenceTol = 1e-12;

// Stacked gradients of the Lie derivatives of the squared-range outputs.
// Columns cover dynamic vehicles only, three per vehicle (x, y, heading),
// ordered by dynamic_indices.
struct ObservabilityMatrix {
  Eigen::MatrixXd entries;
  std::vector<std::string> row_labels;  // generating edge + derivative per row
  std::vector<int> dynamic_indices;     // column-block owner per 3-column block
  int num_anchors{0};
  bool complete_graph{false};  // every dynamic-dynamic and dynamic-anchor edge measured
  bool disconnected{false};    // measurement graph does not connect the fleet

  int num_dynamic() const { return static_cast<int>(dynamic_indices.size()); }
};

// 3x3 block describing how one vehicle's error coordinates enter the
// transformations (rigid translation + rotation) that range-only
// measurements between moving vehicles cannot distinguish.
struct GaugeBlock {
  Eigen::Matrix3d entries;
};

// Gauge block for the ordered pair (i, j) evaluated at their positions.
GaugeBlock gauge_block(const Eigen::Vector2d& pi, const Eigen::Vector2d& pj);

struct RankReport {
  int rank{0};
  std::vector<double> singular_values;  // descending
  int predicted_rank{-1};               // -1 when no closed-form prediction applies
  ObservabilityRegime regime{ObservabilityRegime::kDynamicOnlyPair};
  bool full{false};     // rank equals the number of columns
  int deficiency{0};    // columns - rank
  bool disconnected{false};
};

// Seven stacked gradients for one moving pair (i, j), both estimated.
ObservabilityMatrix pair_matrix_dynamic(const VehicleState& xi, const VehicleState& xj);

// Three stacked gradients for a moving vehicle i ranging a known position pk.
ObservabilityMatrix pair_matrix_anchor(const VehicleState& xi, const Eigen::Vector2d& pk);

// Stacks pair blocks for every measured edge of a fleet. Vehicles are indexed
// by their position in states; static_set lists the indices whose positions
// are known (their columns are dropped). Edges between two static vehicles
// carry no gradient rows but still count for graph connectivity.
ObservabilityMatrix fleet_matrix(const std::vector<VehicleState>& states,
                                 const std::set<int>& static_set,
                                 const std::vector<std::pair<int, int>>& edges);

// Singular-value rank with threshold rel_tol * sigma_max. The closed-form
// prediction is asserted only for complete, connected measurement graphs.
RankReport numerical_rank(const ObservabilityMatrix& m, double rel_tol = 1e-9);

// Reduced row echelon form via Gauss-Jordan with partial pivoting. Entries
// with magnitude below tol are flushed to zero; pivots smaller than tol are
// treated as zero columns.
ObservabilityMatrix rref(const ObservabilityMatrix& m, double tol);

}  // namespace rocl
