#include "wassdyn/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wassdyn/error.hpp"
#include "wassdyn/transport.hpp"

namespace wassdyn {

namespace {

DiscreteMeasure compress_to_cap(const MWOperator& op, DiscreteMeasure mu, double& cost) {
  if (op.compression_cap == 0 || mu.size() <= op.compression_cap) return mu;
  CompressResult c = compress(mu, op.compression_cap, op.p);
  cost += c.bound;
  return std::move(c.measure);
}

}  // namespace

OrbitRecord simulate_orbit(const MWOperator& op, const DiscreteMeasure& mu0, std::size_t steps, std::size_t thin) {
  if (thin == 0) throw ValidationError("simulate_orbit: thin must be >= 1");
  OrbitRecord rec;
  rec.states.push_back(mu0);
  DiscreteMeasure state = mu0;
  for (std::size_t k = 1; k <= steps; ++k) {
    ApplyResult next = apply_kernel_with_bound(op, state);
    rec.compression_cost_total += next.compression_bound;
    state = std::move(next.measure);
    if (k % thin == 0 || k == steps) {
      rec.step_gaps.push_back(wasserstein(rec.states.back(), state, 1.0));
      rec.states.push_back(state);
    }
  }
  return rec;
}

CesaroResult cesaro_average(const MWOperator& op, const DiscreteMeasure& mu0, std::size_t m) {
  if (m < 1) throw ValidationError("cesaro_average: m must be >= 1");
  CesaroResult out{mu0, 0.0};
  DiscreteMeasure state = mu0;
  for (std::size_t k = 1; k < m; ++k) {
    ApplyResult next = apply_kernel_with_bound(op, state);
    out.compression_cost += next.compression_bound;
    state = std::move(next.measure);
    out.measure = compress_to_cap(op, mix(state, out.measure, 1.0 / static_cast<double>(k + 1)), out.compression_cost);
  }
  return out;
}

double stationarity_residual(const MWOperator& op, const DiscreteMeasure& mu) {
  return wasserstein(apply_kernel(op, mu), mu, 1.0);
}

StationaryResult find_stationary(const MWOperator& op, const DiscreteMeasure& mu0, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw ValidationError("find_stationary: tol must be positive");

  StationaryResult res{mu0, 0.0, 0.0, 0, false, 0.0, {}};
  std::size_t used = 0;
  DiscreteMeasure best = mu0;
  double best_residual = INFINITY;

  // Applies the operator and scores the preimage, whose residual is then known.
  struct Scored {
    DiscreteMeasure state;
    DiscreteMeasure image;
    double residual;
  };
  auto score = [&](DiscreteMeasure state) {
    ApplyResult img = apply_kernel_with_bound(op, state);
    ++used;
    res.compression_cost_total += img.compression_bound;
    const double r = wasserstein(img.measure, state, 1.0);
    res.residual_history.push_back(r);
    if (r < best_residual) {
      best_residual = r;
      best = state;
    }
    return Scored{std::move(state), std::move(img.measure), r};
  };
  auto done = [&] { return best_residual <= tol || used >= max_iter; };

  Scored cur = score(mu0);
  for (std::size_t block = 2; !done(); block *= 2) {
    for (std::size_t k = 0; k < block && !done(); ++k) cur = score(std::move(cur.image));
    if (done()) break;

    // Averaging block over the next `block` iterates, starting at cur.
    DiscreteMeasure avg = cur.state;
    double avg_cost = 0.0;
    for (std::size_t k = 1; k < block && !done(); ++k) {
      cur = score(std::move(cur.image));
      avg = compress_to_cap(op, mix(cur.state, avg, 1.0 / static_cast<double>(k + 1)), avg_cost);
    }
    res.compression_cost_total += avg_cost;
    if (done()) break;
    Scored averaged = score(std::move(avg));
    if (averaged.residual < cur.residual) cur = std::move(averaged);
  }

  res.measure = best;
  res.residual = best_residual;
  res.iterations = used;
  res.converged = best_residual <= tol;
  res.residual_p = op.p == 1.0 ? best_residual : wasserstein(apply_kernel(op, best), best, op.p);
  return res;
}

double projection_distance(const DiscreteMeasure& mu, std::span<const Point> anchors, double p) {
  if (!(p >= 1.0)) throw ValidationError("projection_distance: p must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * std::pow(distance_to_set(mu.location(i), anchors), p);
  return std::pow(s, 1.0 / p);
}

DiscreteMeasure nearest_point_projection(const DiscreteMeasure& mu, std::span<const Point> anchors) {
  if (anchors.empty()) throw ValidationError("anchor set must be nonempty");
  std::vector<double> coords;
  coords.reserve(mu.coords().size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double d = euclidean_distance(mu.location(i), anchors[a].coords());
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    coords.insert(coords.end(), anchors[best].coords().begin(), anchors[best].coords().end());
  }
  return DiscreteMeasure::from_flat(mu.dim(), std::move(coords),
                                    std::vector<double>(mu.weights().begin(), mu.weights().end()));
}

std::vector<DiscreteMeasure> invariance_probes(std::span<const Point> anchors, double delta, double p,
                                               std::size_t probes, std::uint64_t seed) {
  if (anchors.empty()) throw ValidationError("invariance probes need a nonempty anchor set");
  const std::size_t d = anchors.front().dim();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> atom_count(2, 8);
  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<DiscreteMeasure> out;
  out.reserve(probes);
  for (std::size_t n = 0; n < probes; ++n) {
    const std::size_t k = atom_count(rng);
    std::vector<std::size_t> base(k);
    std::vector<double> w(k), r(k), dir(k * d);
    double wsum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      base[i] = pick(rng);
      w[i] = 0.1 + unif(rng);
      wsum += w[i];
      r[i] = unif(rng);
      double norm = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        dir[i * d + c] = gauss(rng);
        norm += dir[i * d + c] * dir[i * d + c];
      }
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < d; ++c) dir[i * d + c] = norm > 0.0 ? dir[i * d + c] / norm : 0.0;
    }
    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) q += (w[i] / wsum) * std::pow(r[i], p);
    q = std::pow(q, 1.0 / p);
    // Displacing each atom by s r_i moves it at most s r_i from its anchor,
    // so the projection distance is at most s q = target.
    const double target = delta * (0.5 + 0.5 * unif(rng));
    const double s = q > 0.0 ? target / q : 0.0;
    std::vector<double> coords;
    coords.reserve(k * d);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t c = 0; c < d; ++c) coords.push_back(anchors[base[i]][c] + s * r[i] * dir[i * d + c]);
    }
    out.push_back(DiscreteMeasure::from_flat(d, std::move(coords), std::move(w)));
  }
  return out;
}

InvarianceReport invariance_check(const MWOperator& op, std::span<const Point> anchors, double delta,
                                  double delta_out, std::size_t probes, std::uint64_t seed) {
  if (!(delta > 0.0 && delta <= delta_out)) throw ValidationError("invariance_check: need 0 < delta <= delta_out");
  InvarianceReport rep;
  rep.probes = probes;
  std::size_t index = 0;
  for (DiscreteMeasure& probe : invariance_probes(anchors, delta, op.p, probes, seed)) {
    const double before = projection_distance(probe, anchors, op.p);
    const double after = projection_distance(apply_kernel(op, probe), anchors, op.p);
    rep.max_before = std::max(rep.max_before, before);
    rep.max_after = std::max(rep.max_after, after);
    if (after > delta_out) {
      rep.passed = false;
      rep.failures.push_back({index, before, after, std::move(probe)});
    }
    ++index;
  }
  return rep;
}

std::vector<TailRow> tail_decay_profile(const DiscreteMeasure& mu, std::span<const Point> anchors,
                                        std::span<const double> radii, double p) {
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw ValidationError("tail_decay_profile: radii must be positive and increasing");
    }
  }
  std::vector<TailRow> out;
  out.reserve(radii.size());
  for (double R : radii) {
    const double t = tail_mass(mu, anchors, R);
    out.push_back({R, t, t * std::pow(R, p)});
  }
  return out;
}

}  // namespace wassdyn
