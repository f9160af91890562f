#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hdot/error.hpp"
#include "hdot/ground.hpp"
#include "hdot/matrix.hpp"

namespace hdot {

/// Nonnegative coupling between a source histogram (rows) and a target
/// histogram (columns).
struct TransportPlan {
  Matrix mass;
  std::vector<double> source;
  std::vector<double> target;

  double operator()(std::size_t i, std::size_t j) const { return mass(i, j); }
  double total() const {
    return std::accumulate(mass.data().begin(), mass.data().end(), 0.0);
  }
};

struct OtSolution {
  double loss = 0.0;
  TransportPlan plan;
  std::size_t pivots = 0;
};

/// Exact balanced transport by the transportation simplex method.
///
/// `supply` and `demand` must have equal totals (within 1e-8 relative to the
/// supply mass); demand is rescaled to the supply total before solving.
/// Starts from the north-west corner basis and pivots with Bland's
/// smallest-index rule on both the entering and the leaving cell, which rules
/// out cycling on degenerate bases.
OtSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                           const Matrix& cost);

/// Exact OT loss min <D, T> over plans with row sums s and column sums t.
inline OtSolution solve_exact_ot(std::span<const double> s, std::span<const double> t,
                                 const Matrix& d) {
  if (s.size() != t.size() || d.rows() != s.size() || d.cols() != t.size()) {
    throw InvalidArgument("histogram / ground matrix dimension mismatch");
  }
  return solve_transport(s, t, d);
}

inline OtSolution solve_exact_ot(std::span<const double> s, std::span<const double> t,
                                 const GroundMatrix& d) {
  return solve_exact_ot(s, t, d.entries());
}

struct PlanViolation {
  enum class Kind { nonnegativity, row_sum, column_sum, total_mass, shape };
  Kind kind;
  std::size_t index_i = 0;
  std::size_t index_j = 0;
  double excess = 0.0;

  std::string describe() const;
};

struct PlanReport {
  std::vector<PlanViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Checks T >= 0, row sums <= s, column sums <= t and total mass equal to
/// min(sum s, sum t), each within `tol`.
PlanReport validate_plan(const TransportPlan& plan, double tol = 1e-8);

// ---------------------------------------------------------------------------

namespace detail {

struct BasisCell {
  std::size_t row;
  std::size_t col;
  double flow;
};

/// Spanning tree over the bipartite row/column graph whose edges are the
/// basic cells. Node ids: rows are [0, m), columns are [m, m + n).
class BasisTree {
 public:
  BasisTree(std::size_t m, std::size_t n, const std::vector<BasisCell>& cells)
      : m_(m), adj_(m + n) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      adj_[cells[k].row].push_back(k);
      adj_[m + cells[k].col].push_back(k);
    }
  }

  /// Cell indices on the tree path from `from` to `to`, in walking order.
  std::vector<std::size_t> path(std::size_t from, std::size_t to,
                                const std::vector<BasisCell>& cells) const {
    const std::size_t nodes = adj_.size();
    std::vector<std::size_t> via(nodes, kNone);
    std::vector<std::size_t> stack{from};
    std::vector<bool> seen(nodes, false);
    seen[from] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (u == to) break;
      for (std::size_t k : adj_[u]) {
        const std::size_t w = other(u, cells[k]);
        if (!seen[w]) {
          seen[w] = true;
          via[w] = k;
          stack.push_back(w);
        }
      }
    }
    if (!seen[to]) throw NumericError("transport basis is not a spanning tree");
    std::vector<std::size_t> out;
    for (std::size_t u = to; u != from;) {
      const std::size_t k = via[u];
      out.push_back(k);
      u = other(u, cells[k]);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  /// Dual potentials with u[0] = 0 and u_i + v_j = c_ij on every basic cell.
  void potentials(const std::vector<BasisCell>& cells, const Matrix& cost,
                  std::vector<double>& u, std::vector<double>& v) const {
    const std::size_t nodes = adj_.size();
    std::vector<double> pot(nodes, 0.0);
    std::vector<bool> seen(nodes, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (std::size_t k : adj_[x]) {
        const std::size_t w = other(x, cells[k]);
        if (seen[w]) continue;
        seen[w] = true;
        pot[w] = cost(cells[k].row, cells[k].col) - pot[x];
        stack.push_back(w);
      }
    }
    u.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(m_));
    v.assign(pot.begin() + static_cast<std::ptrdiff_t>(m_), pot.end());
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t other(std::size_t node, const BasisCell& c) const {
    return node < m_ ? m_ + c.col : c.row;
  }

  std::size_t m_;
  std::vector<std::vector<std::size_t>> adj_;
};

}  // namespace detail

inline OtSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  const Matrix& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) throw InvalidArgument("empty histogram");
  if (cost.rows() != m || cost.cols() != n) throw InvalidArgument("cost matrix shape mismatch");
  for (double x : supply) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("negative or non-finite source mass");
  }
  for (double x : demand) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("negative or non-finite target mass");
  }
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw InvalidArgument("non-finite cost");
  }
  const double s_total = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double t_total = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(s_total - t_total) > 1e-8 * std::max(1.0, s_total)) {
    throw InvalidArgument("unbalanced histograms: source and target totals differ");
  }

  std::vector<double> a(supply.begin(), supply.end());
  std::vector<double> b(demand.begin(), demand.end());
  if (t_total > 0.0 && t_total != s_total) {
    for (double& x : b) x *= s_total / t_total;
  }

  // North-west corner start: m + n - 1 cells forming a staircase tree.
  std::vector<detail::BasisCell> cells;
  cells.reserve(m + n - 1);
  {
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double x = std::min(a[i], b[j]);
      const bool row_exhausted = a[i] <= b[j];
      cells.push_back({i, j, x});
      a[i] -= x;
      b[j] -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (row_exhausted) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  double cost_scale = 0.0;
  for (double c : cost.data()) cost_scale = std::max(cost_scale, std::abs(c));
  const double tol = 1e-12 * std::max(1.0, cost_scale);

  std::vector<char> basic(m * n, 0);
  for (const auto& c : cells) basic[c.row * n + c.col] = 1;

  const std::size_t max_pivots = 50 * m * n + 1000;
  std::size_t pivots = 0;
  std::vector<double> u;
  std::vector<double> v;
  while (true) {
    detail::BasisTree tree(m, n, cells);
    tree.potentials(cells, cost, u, v);

    std::size_t enter_i = m;
    std::size_t enter_j = n;
    for (std::size_t i = 0; i < m && enter_i == m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (basic[i * n + j]) continue;
        if (cost(i, j) - u[i] - v[j] < -tol) {
          enter_i = i;
          enter_j = j;
          break;
        }
      }
    }
    if (enter_i == m) break;
    if (++pivots > max_pivots) throw NumericError("transportation simplex did not converge");

    // Cycle: entering cell (+), then the tree path from its row to its
    // column alternating (-, +, ..., -).
    const auto path = tree.path(enter_i, m + enter_j, cells);
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < path.size(); p += 2) theta = std::min(theta, cells[path[p]].flow);

    std::size_t leave = cells.size();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto& c = cells[path[p]];
      if (c.flow != theta) continue;
      if (leave == cells.size() || c.row * n + c.col < cells[leave].row * n + cells[leave].col) {
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      auto& c = cells[path[p]];
      c.flow = (p % 2 == 0) ? c.flow - theta : c.flow + theta;
    }
    basic[cells[leave].row * n + cells[leave].col] = 0;
    cells[leave] = {enter_i, enter_j, theta};
    basic[enter_i * n + enter_j] = 1;
  }

  OtSolution out;
  out.pivots = pivots;
  out.plan.mass = Matrix(m, n, 0.0);
  out.plan.source.assign(supply.begin(), supply.end());
  out.plan.target.assign(demand.begin(), demand.end());
  if (t_total > 0.0 && t_total != s_total) {
    for (double& x : out.plan.target) x *= s_total / t_total;
  }
  for (const auto& c : cells) out.plan.mass(c.row, c.col) = c.flow;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.loss += cost(i, j) * out.plan.mass(i, j);
  }
  return out;
}

inline std::string PlanViolation::describe() const {
  const std::string at = "(" + std::to_string(index_i) + "," + std::to_string(index_j) + ")";
  switch (kind) {
    case Kind::nonnegativity: return "nonnegativity violated at " + at;
    case Kind::row_sum: return "row sum exceeds source mass at row " + std::to_string(index_i);
    case Kind::column_sum: return "column sum exceeds target mass at column " + std::to_string(index_j);
    case Kind::total_mass: return "total-mass constraint violated";
    case Kind::shape: return "plan shape does not match its histograms";
  }
  return "unknown violation";
}

inline PlanReport validate_plan(const TransportPlan& plan, double tol) {
  PlanReport report;
  const auto& t = plan.mass;
  if (t.rows() != plan.source.size() || t.cols() != plan.target.size()) {
    report.violations.push_back({PlanViolation::Kind::shape});
    return report;
  }
  using K = PlanViolation::Kind;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (t(i, j) < -tol) report.violations.push_back({K::nonnegativity, i, j, -t(i, j)});
    }
  }
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double row = 0.0;
    for (double x : t.row(i)) row += x;
    if (row > plan.source[i] + tol) report.violations.push_back({K::row_sum, i, 0, row - plan.source[i]});
  }
  for (std::size_t j = 0; j < t.cols(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) col += t(i, j);
    if (col > plan.target[j] + tol) {
      report.violations.push_back({K::column_sum, 0, j, col - plan.target[j]});
    }
  }
  const double s_total = std::accumulate(plan.source.begin(), plan.source.end(), 0.0);
  const double t_total = std::accumulate(plan.target.begin(), plan.target.end(), 0.0);
  const double moved = plan.total();
  const double expected = std::min(s_total, t_total);
  if (std::abs(moved - expected) > tol) {
    report.violations.push_back({K::total_mass, 0, 0, moved - expected});
  }
  return report;
}

}  // namespace hdot
