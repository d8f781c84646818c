#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/noise.hpp"
#include "wassdyn/transport.hpp"

using namespace wassdyn;

namespace {

// w_p(nu, delta_y)^p computed directly from the atoms.
double dirac_cost(const DiscreteMeasure& nu, const std::vector<double>& y, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) s += nu.weight(i) * std::pow(oracle::euclid(oracle::coords_of(nu, i), y), p);
  return s;
}

std::vector<double> image(const MapSpec& f, double x) {
  const double pt[1] = {x};
  return eval_map(f, pt);
}

std::vector<Point> line_samples(double lo, double hi, int n) {
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back(Point{lo + (hi - lo) * i / (n - 1)});
  return out;
}

}  // namespace

TEST_CASE("kernel_atom examples") {
  const Point x{0.7};
  const DiscreteMeasure det = kernel_atom(KernelSpec::deterministic(MapSpec::pitchfork()), x);
  REQUIRE(det.size() == 1);
  CHECK(det.location(0)[0] == image(MapSpec::pitchfork(), 0.7)[0]);

  const DiscreteMeasure col = kernel_atom(KernelSpec::collapse(MapSpec::identity(), Point{0.0}, 1.0, 1.0), Point{2.0});
  CHECK(oracle::mass_at(col, {2.0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(oracle::mass_at(col, {0.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const KernelSpec g = KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 64);
  const DiscreteMeasure atom = kernel_atom(g, x);
  CHECK(atom.size() == 64);
  const double m1 = dirac_cost(atom, image(MapSpec::pitchfork(), 0.7), 1.0);
  CHECK(std::abs(m1 / (0.1 * std::sqrt(2.0 / M_PI)) - 1.0) <= 0.02);
  for (double w : atom.weights()) CHECK(w == doctest::Approx(1.0 / 64.0));

  const DiscreteMeasure b = kernel_atom(KernelSpec::ball(MapSpec::identity(2), 0.3, 16), Point{1.0, 1.0});
  CHECK(b.size() == 16);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(oracle::euclid(oracle::coords_of(b, i), {1.0, 1.0}) <= 0.3 + 1e-12);

  const DiscreteMeasure g2 = kernel_atom(KernelSpec::gaussian(MapSpec::identity(2), 0.1, 8), Point{0.0, 0.0});
  CHECK(g2.size() == 64);
  CHECK_THROWS_AS(kernel_atom(g, Point{0.0, 0.0}), DimensionError);
}

TEST_CASE("gaussian quantile atoms against the chi moment") {
  const Point x{0.0};
  for (double p : {1.0, 2.0}) {
    for (double sigma : {0.05, 0.1, 0.5}) {
      const DiscreteMeasure atom = kernel_atom(KernelSpec::gaussian(MapSpec::identity(), sigma, 512), x);
      const double mp = std::pow(oracle::gaussian_abs_moment(p, 1), 1.0 / p);
      const double est = std::pow(dirac_cost(atom, {0.0}, p), 1.0 / p);
      CHECK(std::abs(est / (sigma * mp) - 1.0) <= (p == 1.0 ? 0.005 : 0.01));
    }
  }
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    for (std::size_t d : {1u, 2u, 3u}) {
      CHECK(std::abs(gaussian_abs_moment(p, d) / oracle::gaussian_abs_moment(p, d) - 1.0) <= 1e-9);
    }
  }
  CHECK(gaussian_noise_level(0.1, 2.0) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("gaussian discretizations converge monotonically") {
  const Point x{0.3};
  double prev = INFINITY, first = 0.0;
  for (std::size_t n : {4u, 8u, 16u, 32u, 64u}) {
    const DiscreteMeasure a = kernel_atom(KernelSpec::gaussian(MapSpec::identity(), 0.2, n), x);
    const DiscreteMeasure b = kernel_atom(KernelSpec::gaussian(MapSpec::identity(), 0.2, 4 * n), x);
    const double w = oracle::cdf_w1(oracle::as_pairs(a), oracle::as_pairs(b));
    CHECK(w < prev);
    if (n == 4) first = w;
    prev = w;
  }
  CHECK(prev < first / 8.0);
}

TEST_CASE("noise_level examples") {
  const std::vector<Point> samples = line_samples(-3.0, 3.0, 61);
  const MWOperator det{KernelSpec::deterministic(MapSpec::pitchfork()), 256, 1.0};
  const NoiseLevel n0 = noise_level(det, MapSpec::pitchfork(), samples);
  CHECK(n0.estimate == 0.0);
  REQUIRE(n0.analytic_bound.has_value());
  CHECK(*n0.analytic_bound == 0.0);

  const MWOperator col{KernelSpec::collapse(MapSpec::pitchfork(), Point{0.0}, 0.25, 2.0), 256, 2.0};
  const NoiseLevel nc = noise_level(col, MapSpec::pitchfork(), samples);
  CHECK(nc.estimate <= 0.25);
  CHECK(*nc.analytic_bound == 0.25);

  const MWOperator ball{KernelSpec::ball(MapSpec::identity(), 0.3, 16), 256, 1.0};
  const NoiseLevel nb = noise_level(ball, MapSpec::identity(), samples);
  CHECK(nb.estimate <= 0.3);
  CHECK(*nb.analytic_bound == 0.3);

  for (double p : {1.0, 2.0}) {
    const MWOperator g{KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 64), 256, p};
    const NoiseLevel ng = noise_level(g, MapSpec::pitchfork(), samples);
    CHECK(*ng.analytic_bound == doctest::Approx(0.1 * std::pow(oracle::gaussian_abs_moment(p, 1), 1.0 / p)).epsilon(1e-9));
    CHECK(ng.estimate <= *ng.analytic_bound + 1e-9);
  }
}

TEST_CASE("collapse kernel cost matches its closed form") {
  for (double p : {1.0, 1.5, 2.0}) {
    for (double eps : {0.1, 0.5}) {
      const KernelSpec k = KernelSpec::collapse(MapSpec::pitchfork(), Point{0.0}, eps, p);
      for (double x = -4.0; x <= 4.0; x += 0.3) {
        const std::vector<double> fx = image(MapSpec::pitchfork(), x);
        const double d = std::abs(fx[0]);
        const double expected = std::pow(eps, p) * std::pow(d, p) / (1.0 + std::pow(d, p));
        CHECK(std::abs(dirac_cost(kernel_atom(k, Point{x}), fx, p) - expected) <= 1e-12);
      }
    }
  }
}

TEST_CASE("operator_gap examples and the noise-level inequality") {
  const MWOperator det{KernelSpec::deterministic(MapSpec::pitchfork()), 0, 1.0};
  std::mt19937_64 rng(41);
  CHECK(operator_gap(det, MapSpec::pitchfork(), oracle::random_measure(rng, 6, 1)) <= 1e-12);

  const double eps = 0.5, p = 2.0, x = 1.7;
  const MWOperator col{KernelSpec::collapse(MapSpec::identity(), Point{0.0}, eps, p), 0, p};
  const double a = eps * eps / (1.0 + x * x);
  CHECK(operator_gap(col, MapSpec::identity(), DiscreteMeasure::dirac(Point{x})) ==
        doctest::Approx(std::sqrt(a) * x).epsilon(1e-9));

  const std::vector<KernelSpec> kernels{
      KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 16), KernelSpec::ball(MapSpec::pitchfork(), 0.2, 8),
      KernelSpec::collapse(MapSpec::pitchfork(), Point{0.0}, 0.3, 1.0), KernelSpec::deterministic(MapSpec::pitchfork()),
      KernelSpec::mixture({{KernelSpec::gaussian(MapSpec::pitchfork(), 0.2, 8), 0.5},
                           {KernelSpec::deterministic(MapSpec::pitchfork()), 0.5}})};
  for (const KernelSpec& k : kernels) {
    for (double q : {1.0, 2.0}) {
      const MWOperator op{k, 0, q};
      for (int trial = 0; trial < 10; ++trial) {
        const DiscreteMeasure mu = oracle::random_measure(rng, 5, 1);
        double rhs = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
          rhs += mu.weight(i) * dirac_cost(kernel_atom(k, mu.location(i)), image(MapSpec::pitchfork(), mu.location(i)[0]), q);
        }
        const double gap = operator_gap(op, MapSpec::pitchfork(), mu);
        CHECK(std::pow(gap, q) <= rhs + 1e-9);
        CHECK(std::abs(pointwise_noise_integral(op, MapSpec::pitchfork(), mu) - rhs) <= 1e-12);
      }
    }
  }

  for (int trial = 0; trial < 10; ++trial) {
    const MWOperator g{KernelSpec::gaussian(MapSpec::pitchfork(), 0.2, 64), 0, 1.0};
    const DiscreteMeasure mu = oracle::random_measure(rng, 5, 1);
    CHECK(operator_gap(g, MapSpec::pitchfork(), mu) <= 0.2 * oracle::gaussian_abs_moment(1.0, 1) * 1.02);
  }
  const MWOperator big{KernelSpec::gaussian(MapSpec::identity(), 0.1, 512), 0, 1.0};
  CHECK_THROWS_AS(operator_gap(big, MapSpec::identity(), oracle::random_measure(rng, 3, 1)), SolverError);
}

TEST_CASE("apply_kernel reductions and convex linearity") {
  std::mt19937_64 rng(43);
  const DiscreteMeasure mu = oracle::random_measure(rng, 9, 1);
  const MWOperator det{KernelSpec::deterministic(MapSpec::pitchfork()), 256, 1.0};
  const DiscreteMeasure a = apply_kernel(det, mu), b = push_forward(mu, MapSpec::pitchfork());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.location(i)[0] == b.location(i)[0]);
    CHECK(a.weight(i) == doctest::Approx(b.weight(i)).epsilon(1e-15));
  }

  const MWOperator col{KernelSpec::collapse(MapSpec::identity(), Point{0.0}, 1.0, 1.0), 256, 1.0};
  const DiscreteMeasure c = apply_kernel(col, DiscreteMeasure::dirac(Point{2.0}));
  CHECK(wasserstein(c, DiscreteMeasure::dirac(Point{2.0}), 1.0) == doctest::Approx(2.0 / 3.0));

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const MWOperator g{KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 16), 0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteMeasure m = oracle::random_measure(rng, 4, 1), n = oracle::random_measure(rng, 3, 1);
    const double t = u(rng);
    const DiscreteMeasure lhs = apply_kernel(g, mix(m, n, t));
    const DiscreteMeasure rhs = mix(apply_kernel(g, m), apply_kernel(g, n), t);
    REQUIRE(lhs.size() == rhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(std::abs(lhs.location(i)[0] - rhs.location(i)[0]) <= 1e-12);
      CHECK(std::abs(lhs.weight(i) - rhs.weight(i)) <= 1e-12);
    }
  }

  const MWOperator capped{KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 64), 32, 1.0};
  const ApplyResult r = apply_kernel_with_bound(capped, mu);
  CHECK(r.measure.size() <= 32);
  const MWOperator open{capped.kernel, 0, 1.0};
  const DiscreteMeasure full = apply_kernel(open, mu);
  CHECK(oracle::cdf_w1(oracle::as_pairs(full), oracle::as_pairs(r.measure)) <= r.compression_bound + 1e-12);
}

TEST_CASE("mixture noise obeys the Jensen-type bound") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const std::vector<Point> samples = line_samples(-2.0, 2.0, 21);
  for (int trial = 0; trial < 20; ++trial) {
    const double s1 = 0.3 * u(rng), r2 = 0.3 * u(rng), c = u(rng);
    const MapSpec f = MapSpec::pitchfork(), g = MapSpec::scalar_affine(1.0, 0.1 * u(rng));
    const KernelSpec k1 = KernelSpec::gaussian(f, s1, 16), k2 = KernelSpec::ball(g, r2, 8);
    const KernelSpec m = KernelSpec::mixture({{k1, c}, {k2, 1.0 - c}});
    for (double p : {1.0, 2.0}) {
      const double n1 = noise_level(MWOperator{k1, 0, p}, f, samples).estimate;
      const double n2 = noise_level(MWOperator{k2, 0, p}, g, samples).estimate;
      const double nm = noise_level(MWOperator{m, 0, p}, f, samples).estimate;
      double gap = 0.0;
      for (const Point& x : samples) gap = std::max(gap, std::abs(image(f, x[0])[0] - image(g, x[0])[0]));
      CHECK(std::pow(nm, p) <= c * std::pow(n1, p) + (1.0 - c) * std::pow(n2 + gap, p) + 1e-9);
      CHECK(nm <= std::max(n1, n2) + gap + 1e-9);
    }
  }
}

TEST_CASE("parse_kernel forms and round-trip") {
  const KernelSpec g = parse_kernel("gauss(pitchfork,sigma=0.05,n=32)");
  REQUIRE(std::holds_alternative<GaussianKernel>(g.variant()));
  CHECK(std::get<GaussianKernel>(g.variant()).sigma == 0.05);
  CHECK(std::get<GaussianKernel>(g.variant()).n_quantiles == 32);
  const KernelSpec c = parse_kernel("collapse(id:2,x0=(1,2),eps=0.1,p=2)");
  REQUIRE(std::holds_alternative<CollapseKernel>(c.variant()));
  CHECK(std::get<CollapseKernel>(c.variant()).x0[1] == 2.0);
  CHECK(c.dim() == 2);
  const KernelSpec mixk = parse_kernel("mix(det(pitchfork)@1,gauss(pitchfork,sigma=0.1)@3)");
  REQUIRE(std::holds_alternative<MixtureKernel>(mixk.variant()));
  CHECK(std::get<MixtureKernel>(mixk.variant()).components[1].second == doctest::Approx(0.75));

  CHECK(!builtin_kernels().empty());
  for (const char* text : {"det(pitchfork)", "gauss(pitchfork,sigma=0.1,n=64)", "mix(det(pitchfork)@1,gauss(pitchfork,sigma=0.1)@3)",
                           "collapse(id:2,x0=(1,2),eps=0.1,p=2)", "det(expr:x/2)", "ball(sqneg,r=0.3,n=5)", "collapse(pitchfork,eps=0.1)", "gauss(affine:0.5,0,sigma=1)"}) {
    const KernelSpec k = parse_kernel(text);
    CHECK(parse_kernel(k.describe()).describe() == k.describe());
  }

  CHECK_THROWS_AS(parse_kernel("gauss(pitchfork,sigma=-1)"), ValidationError);
  CHECK_THROWS_AS(parse_kernel("gauss(pitchfork,sigma=0.1,n=1)"), ValidationError);
  CHECK_THROWS_AS(parse_kernel("ball(pitchfork,r=0)"), ValidationError);
  CHECK_THROWS_AS(parse_kernel("collapse(pitchfork,eps=0.1,p=0.5)"), ValidationError);
  CHECK_THROWS_AS(parse_kernel("collapse(id:2,x0=1,eps=0.1)"), DimensionError);
  CHECK_THROWS_AS(parse_kernel("mix(det(id)@1,det(id:2)@1)"), DimensionError);
  CHECK_THROWS_AS(parse_kernel("unknown(id)"), ValidationError);
  CHECK_THROWS_AS(parse_kernel("det(id"), ValidationError);
  const DiscreteMeasure g3 = kernel_atom(parse_kernel("gauss(id:3,sigma=0.1,n=64)"), Point{0.0, 0.0, 0.0});
  CHECK(g3.size() == 4096);
}
