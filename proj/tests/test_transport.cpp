#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/transport.hpp"

using namespace wassdyn;

namespace {

DiscreteMeasure two_point(double a, double b) { return DiscreteMeasure::from_atoms({{Point{a}, 0.5}, {Point{b}, 0.5}}); }

void check_plan(const TransportPlan& plan, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  REQUIRE(plan.rows == mu.size());
  REQUIRE(plan.cols == nu.size());
  for (std::size_t i = 0; i < plan.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < plan.cols; ++j) {
      CHECK(plan.at(i, j) >= 0.0);
      row += plan.at(i, j);
    }
    CHECK(std::abs(row - mu.weight(i)) <= 1e-9);
  }
  for (std::size_t j = 0; j < plan.cols; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < plan.rows; ++i) col += plan.at(i, j);
    CHECK(std::abs(col - nu.weight(j)) <= 1e-9);
  }
}

}  // namespace

TEST_CASE("wasserstein_exact examples") {
  std::mt19937_64 rng(1);
  const DiscreteMeasure mu = oracle::random_measure(rng, 5, 2);
  const ExactResult self = wasserstein_exact(mu, mu, 2.0);
  CHECK(self.distance <= 1e-12);
  for (std::size_t i = 0; i < mu.size(); ++i) CHECK(self.plan.at(i, i) == doctest::Approx(mu.weight(i)));

  CHECK(wasserstein_exact(two_point(0, 1), DiscreteMeasure::dirac(Point{0.5}), 1.0).distance == doctest::Approx(0.5));
  CHECK_THROWS_AS(wasserstein_exact(mu, DiscreteMeasure::dirac(Point{0.0}), 1.0), DimensionError);
  CHECK_THROWS_AS(wasserstein_exact(mu, mu, 0.5), ValidationError);
}

TEST_CASE("exact solver matches brute force on uniform instances") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 5, d = 1 + trial % 3;
    const DiscreteMeasure mu = oracle::random_measure(rng, n, d, 3.0, true);
    const DiscreteMeasure nu = oracle::random_measure(rng, n, d, 3.0, true);
    for (double p : {1.0, 2.0}) {
      const ExactResult r = wasserstein_exact(mu, nu, p);
      CHECK(std::abs(r.distance - brute_force_wasserstein(mu, nu, p)) <= 1e-9);
      check_plan(r.plan, mu, nu);
    }
  }
}

TEST_CASE("exact solver reports an optimality certificate") {
  // Complementary slackness: u_i + v_j <= c_ij everywhere and sum u a + sum v b = cost.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + trial % 9, n = 1 + (trial * 7) % 11;
    std::vector<double> a(m), b(n), c(m * n);
    double sa = 0.0, sb = 0.0;
    for (double& x : a) sa += (x = 0.1 + u(rng));
    for (double& x : b) sb += (x = 0.1 + u(rng));
    for (double& x : a) x /= sa;
    for (double& x : b) x /= sb;
    for (double& x : c) x = std::floor(u(rng) * 4.0);  // integer costs force ties and degeneracy
    const TransportSolution s = solve_transportation(a, b, c);
    double dual = 0.0, primal = 0.0;
    for (std::size_t i = 0; i < m; ++i) dual += s.u[i] * a[i];
    for (std::size_t j = 0; j < n; ++j) dual += s.v[j] * b[j];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(s.u[i] + s.v[j] <= c[i * n + j] + 1e-9);
        CHECK(s.flow[i * n + j] >= 0.0);
        primal += s.flow[i * n + j] * c[i * n + j];
      }
    }
    CHECK(std::abs(primal - s.cost) <= 1e-9);
    CHECK(std::abs(primal - dual) <= 1e-9);
  }
}

TEST_CASE("wasserstein_1d examples and quantile oracle") {
  CHECK(wasserstein_1d(DiscreteMeasure::dirac(Point{0.0}), DiscreteMeasure::dirac(Point{3.0}), 2.0) == doctest::Approx(3.0));
  CHECK(wasserstein_1d(two_point(0, 1), two_point(1, 2), 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(wasserstein_1d(DiscreteMeasure::dirac(Point{0.0, 0.0}), DiscreteMeasure::dirac(Point{0.0, 0.0}), 1.0),
                  DimensionError);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const DiscreteMeasure mu = oracle::random_measure(rng, 1 + trial % 10, 1);
    const DiscreteMeasure nu = oracle::random_measure(rng, 1 + (trial * 3) % 13, 1);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const double w = wasserstein_1d(mu, nu, p);
      CHECK(std::abs(w - oracle::quantile_wp(oracle::as_pairs(mu), oracle::as_pairs(nu), p)) <= 1e-10);
      CHECK(std::abs(w - wasserstein_exact(mu, nu, p).distance) <= 1e-8);
    }
    CHECK(std::abs(wasserstein_1d(mu, nu, 1.0) - oracle::cdf_w1(oracle::as_pairs(mu), oracle::as_pairs(nu))) <= 1e-10);
  }
}

TEST_CASE("kr_dual examples and duality") {
  const DiscreteMeasure d0 = DiscreteMeasure::dirac(Point{0.0});
  const DiscreteMeasure d1 = DiscreteMeasure::dirac(Point{1.0});
  CHECK(kr_dual(d0, d1).value == doctest::Approx(1.0));
  const DualResult self = kr_dual(two_point(0, 3), two_point(0, 3));
  CHECK(std::abs(self.value) <= 1e-12);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const DiscreteMeasure mu = oracle::random_measure(rng, 8, d);
    const DiscreteMeasure nu = oracle::random_measure(rng, 8, d);
    const DualResult r = kr_dual(mu, nu);
    CHECK(std::abs(r.value - wasserstein_exact(mu, nu, 1.0).distance) <= 1e-6);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      for (std::size_t j = 0; j < nu.size(); ++j) {
        CHECK(r.potentials.phi[i] - r.potentials.psi[j] <= euclidean_distance(mu.location(i), nu.location(j)) + 1e-9);
      }
    }
  }
}

TEST_CASE("brute force oracle examples and rejections") {
  const DiscreteMeasure u3 = DiscreteMeasure::uniform(std::vector<Point>{Point{0.0}, Point{1.0}, Point{5.0}});
  CHECK(brute_force_wasserstein(u3, u3, 1.0) == 0.0);
  CHECK(brute_force_wasserstein(two_point(0, 1), two_point(1, 2), 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(brute_force_wasserstein(u3, two_point(0, 1), 1.0), ValidationError);
  const DiscreteMeasure skew = DiscreteMeasure::from_atoms({{Point{0.0}, 0.3}, {Point{1.0}, 0.7}});
  CHECK_THROWS_AS(brute_force_wasserstein(skew, skew, 1.0), ValidationError);
  std::vector<Point> eight;
  for (int i = 0; i < 8; ++i) eight.push_back(Point{static_cast<double>(i)});
  const DiscreteMeasure big = DiscreteMeasure::uniform(eight);
  CHECK_THROWS_AS(brute_force_wasserstein(big, big, 1.0), ValidationError);
}

TEST_CASE("metric axioms, monotonicity in p and Dirac reduction") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const DiscreteMeasure a = oracle::random_measure(rng, 1 + trial % 10, d);
    const DiscreteMeasure b = oracle::random_measure(rng, 1 + (trial + 3) % 10, d);
    const DiscreteMeasure c = oracle::random_measure(rng, 1 + (trial + 6) % 10, d);
    for (double p : {1.0, 1.5, 2.0}) {
      const double ab = wasserstein(a, b, p), ba = wasserstein(b, a, p);
      CHECK(std::abs(ab - ba) <= 1e-9);
      CHECK(wasserstein(a, c, p) <= ab + wasserstein(b, c, p) + 1e-9);
      CHECK(wasserstein(a, a, p) <= 1e-9);
      CHECK(wasserstein(a, b, 1.0) <= ab + 1e-9);
    }
    const Point y(std::vector<double>(d, 0.5));
    CHECK(std::abs(std::pow(wasserstein_exact(a, DiscreteMeasure::dirac(y), 1.5).distance, 1.5) - moment_p(a, y, 1.5)) <= 1e-9);
  }
}

TEST_CASE("segment identity and convex interpolation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const DiscreteMeasure m0 = oracle::random_measure(rng, 5, d), m1 = oracle::random_measure(rng, 5, d);
    const DiscreteMeasure n0 = oracle::random_measure(rng, 5, d), n1 = oracle::random_measure(rng, 5, d);
    const double t = u(rng);
    CHECK(std::abs(wasserstein(mix(m1, m0, t), m0, 1.0) - t * wasserstein(m1, m0, 1.0)) <= 1e-8);
    for (double p : {1.0, 2.0}) {
      const double lhs = std::pow(wasserstein(mix(m1, m0, t), mix(n1, n0, t), p), p);
      const double rhs = t * std::pow(wasserstein(m1, n1, p), p) + (1 - t) * std::pow(wasserstein(m0, n0, p), p);
      CHECK(lhs <= rhs + 1e-9);
    }
  }
}

TEST_CASE("solver is deterministic and handles degenerate instances") {
  // Identical locations on both sides with equal weights: maximally degenerate.
  std::vector<Point> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Point{static_cast<double>(i % 5) + 0.1 * static_cast<double>(i)});
  const DiscreteMeasure mu = DiscreteMeasure::uniform(pts);
  const ExactResult a = wasserstein_exact(mu, mu, 1.0), b = wasserstein_exact(mu, mu, 1.0);
  CHECK(a.distance == b.distance);
  CHECK(a.plan.gamma == b.plan.gamma);
  CHECK(a.distance <= 1e-12);

  std::mt19937_64 rng(8);
  const DiscreteMeasure x = oracle::random_measure(rng, 60, 2), y = oracle::random_measure(rng, 70, 2);
  const ExactResult r = wasserstein_exact(x, y, 2.0);
  check_plan(r.plan, x, y);
  const DualResult dual = kr_dual(x, y);
  CHECK(std::abs(dual.value - wasserstein_exact(x, y, 1.0).distance) <= 1e-6);
}
