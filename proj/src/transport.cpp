#include "wassdyn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wassdyn/error.hpp"

namespace wassdyn {

namespace {

void require_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("order p must be a finite real >= 1");
}

double cost_power(std::span<const double> a, std::span<const double> b, double p) {
  if (p == 2.0) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
  }
  const double d = euclidean_distance(a, b);
  return p == 1.0 ? d : std::pow(d, p);
}

// Spanning-tree basis of the transportation problem. Rows are nodes
// 0..m-1, columns m..m+n-1; every basic cell (i, j) is the edge i -- m+j.
class BasisTree {
 public:
  BasisTree(std::size_t m, std::size_t n)
      : m_(m), n_(n), parent_(m + n), parent_cell_(m + n), depth_(m + n), pot_(m + n),
        offset_(m + n + 1), adj_node_(2 * (m + n)), adj_cell_(2 * (m + n)) {}

  // Rebuilds parent pointers and potentials (u_0 = 0) from the basis.
  void rebuild(const std::vector<std::size_t>& basis, std::span<const double> cost) {
    const std::size_t nodes = m_ + n_;
    std::fill(offset_.begin(), offset_.end(), 0);
    for (std::size_t c : basis) {
      ++offset_[c / n_ + 1];
      ++offset_[m_ + c % n_ + 1];
    }
    std::partial_sum(offset_.begin(), offset_.end(), offset_.begin());
    fill_ = std::vector<std::size_t>(offset_.begin(), offset_.end() - 1);
    for (std::size_t c : basis) {
      const std::size_t r = c / n_;
      const std::size_t k = m_ + c % n_;
      adj_node_[fill_[r]] = k;
      adj_cell_[fill_[r]++] = c;
      adj_node_[fill_[k]] = r;
      adj_cell_[fill_[k]++] = c;
    }
    std::vector<bool> seen(nodes, false);
    queue_.assign(1, 0);
    seen[0] = true;
    parent_[0] = nodes;
    depth_[0] = 0;
    pot_[0] = 0.0;
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      const std::size_t a = queue_[head];
      for (std::size_t e = offset_[a]; e < offset_[a + 1]; ++e) {
        const std::size_t b = adj_node_[e];
        if (seen[b]) continue;
        seen[b] = true;
        parent_[b] = a;
        parent_cell_[b] = adj_cell_[e];
        depth_[b] = depth_[a] + 1;
        pot_[b] = cost[adj_cell_[e]] - pot_[a];
        queue_.push_back(b);
      }
    }
    if (queue_.size() != nodes) throw SolverError("transport basis is not a spanning tree");
  }

  double u(std::size_t i) const { return pot_[i]; }
  double v(std::size_t j) const { return pot_[m_ + j]; }

  // Cells on the tree path from column node m+j to row node i, in order.
  std::vector<std::size_t> path(std::size_t i, std::size_t j) const {
    std::size_t a = m_ + j;
    std::size_t b = i;
    std::vector<std::size_t> from_col;
    std::vector<std::size_t> from_row;
    while (depth_[a] > depth_[b]) {
      from_col.push_back(parent_cell_[a]);
      a = parent_[a];
    }
    while (depth_[b] > depth_[a]) {
      from_row.push_back(parent_cell_[b]);
      b = parent_[b];
    }
    while (a != b) {
      from_col.push_back(parent_cell_[a]);
      a = parent_[a];
      from_row.push_back(parent_cell_[b]);
      b = parent_[b];
    }
    from_col.insert(from_col.end(), from_row.rbegin(), from_row.rend());
    return from_col;
  }

 private:
  std::size_t m_, n_;
  std::vector<std::size_t> parent_, parent_cell_, depth_;
  std::vector<double> pot_;
  std::vector<std::size_t> offset_, fill_, adj_node_, adj_cell_, queue_;
};

}  // namespace

TransportSolution solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                       std::span<const double> cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) throw SolverError("empty transportation problem");
  if (cost.size() != m * n) throw DimensionError("cost matrix size mismatch");

  TransportSolution sol;
  sol.flow.assign(m * n, 0.0);
  std::vector<bool> in_basis(m * n, false);
  std::vector<std::size_t> basis;
  basis.reserve(m + n - 1);

  // Northwest corner: exactly m + n - 1 cells forming a spanning tree.
  {
    std::vector<double> ra(supply.begin(), supply.end());
    std::vector<double> rb(demand.begin(), demand.end());
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double x = std::min(ra[i], rb[j]);
      const std::size_t c = i * n + j;
      sol.flow[c] = x;
      in_basis[c] = true;
      basis.push_back(c);
      ra[i] -= x;
      rb[j] -= x;
      if (i + 1 == m && j + 1 == n) break;
      if (j + 1 == n || (i + 1 < m && ra[i] <= 0.0)) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, std::abs(c));
  const double rc_tol = 1e-12 * (1.0 + cmax);
  const double degenerate_tol = 1e-14;
  const std::size_t max_pivots = std::max<std::size_t>(10000, 50 * m * n);
  const std::size_t stall_limit = 2 * (m + n);

  BasisTree tree(m, n);
  std::size_t stalled = 0;
  bool bland = false;
  while (true) {
    tree.rebuild(basis, cost);

    std::size_t entering = m * n;
    double best_rc = -rc_tol;
    for (std::size_t i = 0; i < m && !(bland && entering < m * n); ++i) {
      const double ui = tree.u(i);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t c = i * n + j;
        if (in_basis[c]) continue;
        const double rc = cost[c] - ui - tree.v(j);
        if (rc < best_rc) {
          best_rc = rc;
          entering = c;
          if (bland) break;
        }
      }
    }
    if (entering == m * n) break;
    if (++sol.pivots > max_pivots) throw SolverError("transport simplex did not converge");

    const std::vector<std::size_t> cycle = tree.path(entering / n, entering % n);
    // Cycle edges alternate starting with a decreasing edge at the column end.
    std::size_t leaving = m * n;
    double theta = INFINITY;
    for (std::size_t t = 0; t < cycle.size(); t += 2) {
      const std::size_t c = cycle[t];
      if (sol.flow[c] < theta || (sol.flow[c] == theta && c < leaving)) {
        theta = sol.flow[c];
        leaving = c;
      }
    }
    sol.flow[entering] = theta;
    for (std::size_t t = 0; t < cycle.size(); ++t) {
      const std::size_t c = cycle[t];
      sol.flow[c] = t % 2 == 0 ? sol.flow[c] - theta : sol.flow[c] + theta;
    }
    sol.flow[leaving] = 0.0;
    in_basis[leaving] = false;
    in_basis[entering] = true;
    *std::find(basis.begin(), basis.end(), leaving) = entering;

    if (theta <= degenerate_tol) {
      if (++stalled >= stall_limit) bland = true;
    } else {
      stalled = 0;
      bland = false;
    }
  }

  sol.u.resize(m);
  sol.v.resize(n);
  for (std::size_t i = 0; i < m; ++i) sol.u[i] = tree.u(i);
  for (std::size_t j = 0; j < n; ++j) sol.v[j] = tree.v(j);
  for (std::size_t c = 0; c < m * n; ++c) sol.cost += sol.flow[c] * cost[c];
  return sol;
}

std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (mu.dim() != nu.dim()) throw DimensionError("transport: dimension mismatch");
  std::vector<double> c(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      c[i * nu.size() + j] = cost_power(mu.location(i), nu.location(j), p);
    }
  }
  return c;
}

ExactResult wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  require_order(p);
  const std::vector<double> c = cost_matrix(mu, nu, p);
  TransportSolution sol = solve_transportation(mu.weights(), nu.weights(), c);

  ExactResult out;
  TransportPlan& plan = out.plan;
  plan.rows = mu.size();
  plan.cols = nu.size();
  plan.gamma = std::move(sol.flow);
  plan.row_marginal.assign(plan.rows, 0.0);
  plan.col_marginal.assign(plan.cols, 0.0);
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      plan.row_marginal[i] += plan.at(i, j);
      plan.col_marginal[j] += plan.at(i, j);
    }
  }
  plan.cost = std::max(0.0, sol.cost);
  out.distance = std::pow(plan.cost, 1.0 / p);
  return out;
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  require_order(p);
  if (mu.dim() != 1 || nu.dim() != 1) throw DimensionError("wasserstein_1d requires dimension 1");
  auto sorted = [](const DiscreteMeasure& m) {
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return m.location(a)[0] < m.location(b)[0]; });
    return idx;
  };
  const auto a = sorted(mu);
  const auto b = sorted(nu);
  std::size_t i = 0;
  std::size_t j = 0;
  double ra = mu.weight(a[0]);
  double rb = nu.weight(b[0]);
  double total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double q = std::min(ra, rb);
    const double d = std::abs(mu.location(a[i])[0] - nu.location(b[j])[0]);
    total += q * (p == 1.0 ? d : std::pow(d, p));
    const bool row_done = ra == q;
    const bool col_done = rb == q;
    ra -= q;
    rb -= q;
    if (row_done && ++i < a.size()) ra = mu.weight(a[i]);
    if (col_done && ++j < b.size()) rb = nu.weight(b[j]);
  }
  return std::pow(total, 1.0 / p);
}

DualResult kr_dual(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const std::vector<double> c = cost_matrix(mu, nu, 1.0);
  const TransportSolution sol = solve_transportation(mu.weights(), nu.weights(), c);
  const std::size_t m = mu.size();
  const std::size_t n = nu.size();

  DualResult out;
  out.potentials.phi = sol.u;
  out.potentials.psi.assign(n, -INFINITY);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      out.potentials.psi[j] = std::max(out.potentials.psi[j], out.potentials.phi[i] - c[i * n + j]);
    }
  }
  for (std::size_t i = 0; i < m; ++i) out.value += out.potentials.phi[i] * mu.weight(i);
  for (std::size_t j = 0; j < n; ++j) out.value -= out.potentials.psi[j] * nu.weight(j);
  return out;
}

double brute_force_wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  require_order(p);
  if (mu.dim() != nu.dim()) throw DimensionError("brute force: dimension mismatch");
  const std::size_t n = mu.size();
  if (nu.size() != n) throw ValidationError("brute force: supports must have equal size");
  if (n > 7) throw ValidationError("brute force: support larger than 7");
  for (const DiscreteMeasure* m : {&mu, &nu}) {
    for (double w : m->weights()) {
      if (std::abs(w - 1.0 / static_cast<double>(n)) > 1e-12) {
        throw ValidationError("brute force: measures must be uniform");
      }
    }
  }
  const std::vector<double> c = cost_matrix(mu, nu, p);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c[i * n + perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best / static_cast<double>(n), 1.0 / p);
}

double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (mu.dim() == 1 && nu.dim() == 1) return wasserstein_1d(mu, nu, p);
  return wasserstein_exact(mu, nu, p).distance;
}

}  // namespace wassdyn
