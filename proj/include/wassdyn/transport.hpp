#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wassdyn/measure.hpp"

namespace wassdyn {

/// Coupling between two discrete measures, stored densely (row-major).
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> gamma;
  std::vector<double> row_marginal;
  std::vector<double> col_marginal;
  /// Sum_ij gamma_ij |x_i - y_j|^p.
  double cost = 0.0;

  double at(std::size_t i, std::size_t j) const { return gamma[i * cols + j]; }
};

/// Kantorovich potentials for w_1: phi_i - psi_j <= |x_i - y_j|.
struct DualPotentials {
  std::vector<double> phi;
  std::vector<double> psi;
};

struct ExactResult {
  double distance = 0.0;
  TransportPlan plan;
};

struct DualResult {
  double value = 0.0;
  DualPotentials potentials;
};

/// Solution of a balanced transportation problem.
struct TransportSolution {
  std::vector<double> flow;  // rows x cols, row-major
  std::vector<double> u;     // row potentials, u_i + v_j <= c_ij at optimum
  std::vector<double> v;     // column potentials
  double cost = 0.0;
  std::size_t pivots = 0;
};

/// Transportation network simplex on the complete bipartite graph.
///
/// The initial basis comes from the northwest-corner rule. Entering cells are
/// chosen by most negative reduced cost with lowest-index ties; after a run of
/// degenerate pivots the rule switches to Bland's (first negative cell, lowest
/// leaving index) until the objective strictly decreases again, which rules
/// out cycling. Output is deterministic for fixed input.
TransportSolution solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                       std::span<const double> cost);

/// Cost matrix |x_i - y_j|^p.
std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

ExactResult wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// Quantile coupling on the line.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// w_1 through Kantorovich-Rubinstein duality, potentials taken from the
/// primal solver and then c-transformed so that feasibility holds exactly.
DualResult kr_dual(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Enumerates all n! assignments. Both measures uniform with n <= 7 atoms.
double brute_force_wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// w_p value only: exact quantile formula on the line, network simplex otherwise.
double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

}  // namespace wassdyn
