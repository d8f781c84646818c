#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wassdyn/measure.hpp"
#include "wassdyn/noise.hpp"

namespace wassdyn {

struct OrbitRecord {
  std::vector<DiscreteMeasure> states;  // mu0 and every `thin`-th iterate
  std::vector<double> step_gaps;        // w_1 between consecutive stored states
  double compression_cost_total = 0.0;
};

OrbitRecord simulate_orbit(const MWOperator& op, const DiscreteMeasure& mu0, std::size_t steps,
                           std::size_t thin = 1);

struct CesaroResult {
  DiscreteMeasure measure;
  double compression_cost = 0.0;
};

/// (1/m) Sum_{k<m} P^k(mu0), kept as a running mean compressed to the
/// operator's cap after every update.
CesaroResult cesaro_average(const MWOperator& op, const DiscreteMeasure& mu0, std::size_t m);

/// w_1(P(mu), mu).
double stationarity_residual(const MWOperator& op, const DiscreteMeasure& mu);

struct StationaryResult {
  DiscreteMeasure measure;
  double residual = 0.0;    // w_1(P(mu*), mu*)
  double residual_p = 0.0;  // the same in the operator's order p
  std::size_t iterations = 0;
  bool converged = false;
  double compression_cost_total = 0.0;
  std::vector<double> residual_history;  // residual of every visited state
};

/// Alternates plain iteration and Cesaro averaging in blocks of doubling
/// length (2, 4, 8, ...). After each averaging block the search continues
/// from whichever of the averaged measure and the orbit endpoint has the
/// smaller residual. Stops once a visited state has residual <= tol or
/// `max_iter` operator applications are spent, and returns the best state.
StationaryResult find_stationary(const MWOperator& op, const DiscreteMeasure& mu0, double tol,
                                 std::size_t max_iter);

/// (Sum_i w_i d(x_i, A)^p)^(1/p), the w_p distance from mu to the set of
/// probability measures supported on the finite anchor set A.
double projection_distance(const DiscreteMeasure& mu, std::span<const Point> anchors, double p);

/// Image of mu under the nearest-anchor map (lowest anchor index on ties);
/// it attains projection_distance.
DiscreteMeasure nearest_point_projection(const DiscreteMeasure& mu, std::span<const Point> anchors);

struct InvarianceFailure {
  std::size_t probe = 0;
  double before = 0.0;
  double after = 0.0;
  DiscreteMeasure witness;
};

struct InvarianceReport {
  std::size_t probes = 0;
  bool passed = true;
  double max_before = 0.0;
  double max_after = 0.0;
  std::vector<InvarianceFailure> failures;
};

/// Seeded random probe measures with projection distance <= delta are
/// mapped once by the operator; the check passes when every image stays
/// within projection distance delta_out. A probe places 2..8 atoms at
/// random anchors and displaces them radially, scaled so that the
/// projection-distance constraint holds by construction.
InvarianceReport invariance_check(const MWOperator& op, std::span<const Point> anchors, double delta,
                                  double delta_out, std::size_t probes, std::uint64_t seed);

std::vector<DiscreteMeasure> invariance_probes(std::span<const Point> anchors, double delta, double p,
                                               std::size_t probes, std::uint64_t seed);

struct TailRow {
  double radius = 0.0;
  double tail_mass = 0.0;
  double normalized = 0.0;  // tail_mass * R^p
};

std::vector<TailRow> tail_decay_profile(const DiscreteMeasure& mu, std::span<const Point> anchors,
                                        std::span<const double> radii, double p);

}  // namespace wassdyn
