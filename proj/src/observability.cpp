#include "rocl/observability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "rocl/errors.hpp"

namespace rocl {
namespace {

// Shorthands shared by every gradient row of a pair (i, j):
//   d_minus = sin(theta) * dx - cos(theta) * dy
//   d_plus  = cos(theta) * dx + sin(theta) * dy
// evaluated with the pair displacement (dx, dy) = p_i - p_j and the heading
// of the vehicle the row differentiates against.
struct PairGeometry {
  double dx{0.0}, dy{0.0};
  double ci{0.0}, si{0.0}, cj{0.0}, sj{0.0};
  double di_minus{0.0}, di_plus{0.0};
  double dj_minus{0.0}, dj_plus{0.0};
  double sin_rel{0.0}, cos_rel{0.0};  // of theta_i - theta_j
};

PairGeometry make_geometry(const VehicleState& xi, const VehicleState& xj) {
  PairGeometry g;
  g.dx = xi.position.x() - xj.position.x();
  g.dy = xi.position.y() - xj.position.y();
  g.ci = std::cos(xi.heading);
  g.si = std::sin(xi.heading);
  g.cj = std::cos(xj.heading);
  g.sj = std::sin(xj.heading);
  g.di_minus = g.si * g.dx - g.ci * g.dy;
  g.di_plus = g.ci * g.dx + g.si * g.dy;
  g.dj_minus = g.sj * g.dx - g.cj * g.dy;
  g.dj_plus = g.cj * g.dx + g.sj * g.dy;
  g.sin_rel = std::sin(xi.heading - xj.heading);
  g.cos_rel = std::cos(xi.heading - xj.heading);
  return g;
}

void check_separation(double dx, double dy, const std::string& context) {
  if (std::hypot(dx, dy) <= kCoincidenceTol) {
    throw DegenerateConfigError("coincident vehicles on measured edge: " + context);
  }
}

Eigen::Matrix<double, 7, 6> dynamic_pair_rows(const PairGeometry& g) {
  Eigen::Matrix<double, 7, 6> m;
  m << g.dx, g.dy, 0.0, -g.dx, -g.dy, 0.0,
      g.ci, g.si, -g.di_minus, -g.ci, -g.si, 0.0,
      -g.cj, -g.sj, 0.0, g.cj, g.sj, g.dj_minus,
      0.0, 0.0, g.sin_rel, 0.0, 0.0, -g.sin_rel,
      -g.si, g.ci, -g.di_plus, g.si, -g.ci, 0.0,
      g.sj, -g.cj, 0.0, -g.sj, g.cj, g.dj_plus,
      0.0, 0.0, g.cos_rel, 0.0, 0.0, -g.cos_rel;
  return m;
}

Eigen::Matrix3d anchor_rows(const VehicleState& xi, const Eigen::Vector2d& pk) {
  const double dx = xi.position.x() - pk.x();
  const double dy = xi.position.y() - pk.y();
  const double ci = std::cos(xi.heading);
  const double si = std::sin(xi.heading);
  const double d_minus = si * dx - ci * dy;
  const double d_plus = ci * dx + si * dy;
  Eigen::Matrix3d m;
  m << dx, dy, 0.0,
      ci, si, -d_minus,
      -si, ci, -d_plus;
  return m;
}

const char* const kPairRowNames[7] = {
    "L0", "L1_vi", "L1_vj", "L2_vi_vj", "L2_vi_wi", "L2_vj_wj", "L3_vi_vj_wi",
};

const char* const kAnchorRowNames[3] = {"L0", "L1_vi", "L2_vi_wi"};

std::string edge_label(int a, int b, const char* row) {
  return "edge(" + std::to_string(a) + "," + std::to_string(b) + ") " + row;
}

// Union-find over vehicle indices, used for the connectivity warning.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  void merge(int a, int b) { parent_[find(a)] = find(b); }

  bool single_component() {
    const int root = find(0);
    for (int i = 1; i < static_cast<int>(parent_.size()); ++i) {
      if (find(i) != root) return false;
    }
    return true;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

const char* to_string(ObservabilityRegime regime) {
  switch (regime) {
    case ObservabilityRegime::kDynamicOnlyPair:
      return "dynamic-only pair";
    case ObservabilityRegime::kDynamicOnlyFleet:
      return "dynamic-only fleet";
    case ObservabilityRegime::kOneAnchor:
      return "one anchor";
    case ObservabilityRegime::kTwoAnchors:
      return "two anchors";
  }
  return "unknown";
}

GaugeBlock gauge_block(const Eigen::Vector2d& pi, const Eigen::Vector2d& pj) {
  const double dx = pi.x() - pj.x();
  const double dy = pi.y() - pj.y();
  GaugeBlock g;
  g.entries << -1.0, 0.0, dy,
      0.0, -1.0, -dx,
      0.0, 0.0, -1.0;
  return g;
}

ObservabilityMatrix pair_matrix_dynamic(const VehicleState& xi, const VehicleState& xj) {
  const PairGeometry g = make_geometry(xi, xj);
  check_separation(g.dx, g.dy, "pair_matrix_dynamic");

  ObservabilityMatrix m;
  m.entries = dynamic_pair_rows(g);
  for (const char* name : kPairRowNames) {
    m.row_labels.push_back(edge_label(0, 1, name));
  }
  m.dynamic_indices = {0, 1};
  m.num_anchors = 0;
  m.complete_graph = true;
  return m;
}

ObservabilityMatrix pair_matrix_anchor(const VehicleState& xi, const Eigen::Vector2d& pk) {
  const double dx = xi.position.x() - pk.x();
  const double dy = xi.position.y() - pk.y();
  check_separation(dx, dy, "pair_matrix_anchor");

  ObservabilityMatrix m;
  m.entries = anchor_rows(xi, pk);
  for (const char* name : kAnchorRowNames) {
    m.row_labels.push_back(edge_label(0, -1, name));
  }
  m.dynamic_indices = {0};
  m.num_anchors = 1;
  m.complete_graph = true;
  return m;
}

ObservabilityMatrix fleet_matrix(const std::vector<VehicleState>& states,
                                 const std::set<int>& static_set,
                                 const std::vector<std::pair<int, int>>& edges) {
  const int n = static_cast<int>(states.size());
  if (n < 2) {
    throw std::invalid_argument("fleet_matrix: need at least two vehicles");
  }
  for (int s : static_set) {
    if (s < 0 || s >= n) {
      throw std::invalid_argument("fleet_matrix: static index out of range");
    }
  }

  std::vector<int> dynamic;
  std::map<int, int> col_of;  // vehicle index -> column offset
  for (int i = 0; i < n; ++i) {
    if (!static_set.count(i)) {
      col_of[i] = 3 * static_cast<int>(dynamic.size());
      dynamic.push_back(i);
    }
  }
  if (dynamic.empty()) {
    throw std::invalid_argument("fleet_matrix: no dynamic vehicles to estimate");
  }

  // Normalize, deduplicate and validate the edge set.
  std::set<std::pair<int, int>> unique_edges;
  for (auto [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b) {
      throw std::invalid_argument("fleet_matrix: invalid edge");
    }
    unique_edges.insert({std::min(a, b), std::max(a, b)});
  }

  UnionFind components(n);
  int rows = 0;
  for (auto [a, b] : unique_edges) {
    components.merge(a, b);
    const bool a_static = static_set.count(a) > 0;
    const bool b_static = static_set.count(b) > 0;
    if (a_static && b_static) continue;  // no estimated columns involved
    rows += (a_static || b_static) ? 3 : 7;
  }
  if (rows == 0) {
    throw std::invalid_argument("fleet_matrix: no measured edge touches a dynamic vehicle");
  }

  ObservabilityMatrix m;
  m.dynamic_indices = dynamic;
  m.num_anchors = static_cast<int>(static_set.size());
  m.disconnected = !components.single_component();
  m.entries = Eigen::MatrixXd::Zero(rows, 3 * static_cast<int>(dynamic.size()));

  int row = 0;
  for (auto [a, b] : unique_edges) {
    const bool a_static = static_set.count(a) > 0;
    const bool b_static = static_set.count(b) > 0;
    if (a_static && b_static) continue;

    if (!a_static && !b_static) {
      const PairGeometry g = make_geometry(states[a], states[b]);
      check_separation(g.dx, g.dy, "fleet edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
      const auto block = dynamic_pair_rows(g);
      m.entries.block<7, 3>(row, col_of[a]) = block.leftCols<3>();
      m.entries.block<7, 3>(row, col_of[b]) = block.rightCols<3>();
      for (const char* name : kPairRowNames) {
        m.row_labels.push_back(edge_label(a, b, name));
      }
      row += 7;
    } else {
      const int moving = a_static ? b : a;
      const int anchor = a_static ? a : b;
      const double dx = states[moving].position.x() - states[anchor].position.x();
      const double dy = states[moving].position.y() - states[anchor].position.y();
      check_separation(dx, dy,
                       "fleet edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
      m.entries.block<3, 3>(row, col_of[moving]) =
          anchor_rows(states[moving], states[anchor].position);
      for (const char* name : kAnchorRowNames) {
        m.row_labels.push_back(edge_label(moving, anchor, name));
      }
      row += 3;
    }
  }

  // Complete means every dynamic-dynamic and dynamic-static pair is measured.
  bool complete = true;
  for (size_t i = 0; i < dynamic.size() && complete; ++i) {
    for (size_t j = i + 1; j < dynamic.size() && complete; ++j) {
      complete = unique_edges.count({std::min(dynamic[i], dynamic[j]),
                                     std::max(dynamic[i], dynamic[j])}) > 0;
    }
    for (int s : static_set) {
      if (!complete) break;
      complete = unique_edges.count({std::min(dynamic[i], s), std::max(dynamic[i], s)}) > 0;
    }
  }
  m.complete_graph = complete;
  return m;
}

RankReport numerical_rank(const ObservabilityMatrix& m, double rel_tol) {
  if (m.entries.size() == 0) {
    throw std::invalid_argument("numerical_rank: empty matrix");
  }
  if (!(rel_tol > 0.0)) {
    throw std::invalid_argument("numerical_rank: rel_tol must be positive");
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.entries);
  const auto& sv = svd.singularValues();

  RankReport report;
  report.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  if (sigma_max > 0.0) {
    const double threshold = rel_tol * sigma_max;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > threshold) ++report.rank;
    }
  }

  const int n = m.num_dynamic();
  if (m.num_anchors == 0) {
    report.regime = n == 2 ? ObservabilityRegime::kDynamicOnlyPair
                           : ObservabilityRegime::kDynamicOnlyFleet;
  } else if (m.num_anchors == 1) {
    report.regime = ObservabilityRegime::kOneAnchor;
  } else {
    report.regime = ObservabilityRegime::kTwoAnchors;
  }

  if (m.complete_graph && !m.disconnected) {
    if (m.num_anchors == 0) {
      report.predicted_rank = 3 * (n - 1);
    } else if (m.num_anchors == 1) {
      report.predicted_rank = 3 * n - 1;
    } else {
      report.predicted_rank = 3 * n;
    }
  }

  const int cols = static_cast<int>(m.entries.cols());
  report.full = cols > 0 && report.rank == cols;
  report.deficiency = cols - report.rank;
  report.disconnected = m.disconnected;
  return report;
}

ObservabilityMatrix rref(const ObservabilityMatrix& m, double tol) {
  if (m.entries.size() == 0) {
    throw std::invalid_argument("rref: empty matrix");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("rref: tol must be positive");
  }

  Eigen::MatrixXd a = m.entries;
  const int rows = static_cast<int>(a.rows());
  const int cols = static_cast<int>(a.cols());

  int lead = 0;
  for (int col = 0; col < cols && lead < rows; ++col) {
    int pivot = -1;
    double best = tol;
    for (int r = lead; r < rows; ++r) {
      if (std::abs(a(r, col)) > best) {
        best = std::abs(a(r, col));
        pivot = r;
      }
    }
    if (pivot < 0) continue;

    a.row(pivot).swap(a.row(lead));
    a.row(lead) /= a(lead, col);
    a(lead, col) = 1.0;
    for (int r = 0; r < rows; ++r) {
      if (r == lead) continue;
      const double factor = a(r, col);
      if (factor != 0.0) {
        a.row(r) -= factor * a.row(lead);
        a(r, col) = 0.0;
      }
    }
    ++lead;
  }

  a = a.unaryExpr([tol](double x) { return std::abs(x) < tol ? 0.0 : x; });

  ObservabilityMatrix out = m;
  out.entries = std::move(a);
  out.row_labels.assign(rows, "rref");
  return out;
}

}  // namespace rocl
