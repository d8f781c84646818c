#pragma once

// Reference computations that do not share code paths with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "wassdyn/measure.hpp"

namespace oracle {

using Weighted = std::vector<std::pair<double, double>>;  // (location, weight)

inline Weighted as_pairs(const wassdyn::DiscreteMeasure& mu) {
  Weighted out;
  for (std::size_t i = 0; i < mu.size(); ++i) out.emplace_back(mu.location(i)[0], mu.weight(i));
  return out;
}

// Left-continuous quantile function of a 1-D discrete law at level q in (0, 1).
inline double quantile(Weighted a, double q) {
  std::sort(a.begin(), a.end());
  double total = 0.0;
  for (const auto& [x, w] : a) total += w;
  double acc = 0.0;
  for (const auto& [x, w] : a) {
    acc += w / total;
    if (q <= acc) return x;
  }
  return a.back().first;
}

// (Integral_0^1 |F^-1 - G^-1|^p)^(1/p): both quantile functions are constant
// between consecutive cumulative breakpoints, so evaluating at each cell
// midpoint is exact.
inline double quantile_wp(const Weighted& a, const Weighted& b, double p) {
  std::vector<double> cuts{0.0, 1.0};
  for (const Weighted* m : {&a, &b}) {
    Weighted s = *m;
    std::sort(s.begin(), s.end());
    double total = 0.0, acc = 0.0;
    for (const auto& [x, w] : s) total += w;
    for (const auto& [x, w] : s) {
      acc += w / total;
      cuts.push_back(std::min(acc, 1.0));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double sum = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double len = cuts[k] - cuts[k - 1];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (cuts[k] + cuts[k - 1]);
    sum += len * std::pow(std::abs(quantile(a, mid) - quantile(b, mid)), p);
  }
  return std::pow(sum, 1.0 / p);
}

// Integral |F - G| dx over the real line, the 1-D w_1.
inline double cdf_w1(const Weighted& a, const Weighted& b) {
  std::vector<double> xs;
  for (const auto& [x, w] : a) xs.push_back(x);
  for (const auto& [x, w] : b) xs.push_back(x);
  std::sort(xs.begin(), xs.end());
  auto cdf = [](const Weighted& m, double t) {
    double total = 0.0, below = 0.0;
    for (const auto& [x, w] : m) {
      total += w;
      if (x <= t) below += w;
    }
    return below / total;
  };
  double sum = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k) sum += (xs[k] - xs[k - 1]) * std::abs(cdf(a, xs[k - 1]) - cdf(b, xs[k - 1]));
  return sum;
}

// E|Z|^p for Z standard normal in R^d (chi distribution moment).
inline double gaussian_abs_moment(double p, std::size_t d) {
  return std::pow(2.0, p / 2.0) * std::tgamma((static_cast<double>(d) + p) / 2.0) / std::tgamma(static_cast<double>(d) / 2.0);
}

// Exact flow of x' = x - x^3.
inline double pitchfork_flow(double x0, double t) {
  const double e = std::exp(t);
  return x0 * e / std::sqrt(1.0 - x0 * x0 + x0 * x0 * e * e);
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Points with coordinates uniform in [-scale, scale]; random or uniform weights.
inline wassdyn::DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale = 3.0,
                                               bool uniform_weights = false) {
  std::uniform_real_distribution<double> coord(-scale, scale), weight(0.05, 1.0);
  std::vector<wassdyn::Atom> atoms;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (double& c : x) c = coord(rng);
    atoms.push_back({wassdyn::Point(std::move(x)), uniform_weights ? 1.0 : weight(rng)});
  }
  return wassdyn::DiscreteMeasure::from_atoms(atoms);
}

inline std::vector<double> coords_of(const wassdyn::DiscreteMeasure& mu, std::size_t i) {
  return {mu.location(i).begin(), mu.location(i).end()};
}

// Total weight mu assigns to locations within tol of x.
inline double mass_at(const wassdyn::DiscreteMeasure& mu, const std::vector<double>& x, double tol = 1e-12) {
  double m = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (euclid(coords_of(mu, i), x) <= tol) m += mu.weight(i);
  }
  return m;
}

}  // namespace oracle
