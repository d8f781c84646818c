#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wassdyn/dynamics.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/transport.hpp"

using namespace wassdyn;

namespace {

double at(const MapSpec& f, double x) {
  const double pt[1] = {x};
  return eval_map(f, pt)[0];
}

}  // namespace

TEST_CASE("pitchfork time-one map against the exact flow") {
  const MapSpec f = MapSpec::pitchfork();
  CHECK(std::abs(at(f, 2.0) - oracle::pitchfork_flow(2.0, 1.0)) <= 1e-6);
  CHECK(std::abs(at(f, 2.0) - 1.054972) <= 1e-5);
  for (double x : {-1.0, 0.0, 1.0}) CHECK(std::abs(at(f, x) - x) <= 1e-9);
  for (double x = -10.0; x <= 10.0; x += 0.37) CHECK(std::abs(at(f, x) - oracle::pitchfork_flow(x, 1.0)) <= 1e-6);
  CHECK(std::abs(pitchfork_flow_exact(2.0) - oracle::pitchfork_flow(2.0, 1.0)) <= 1e-15);
}

TEST_CASE("pitchfork integrator is fourth order") {
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    if (std::abs(x) < 1e-9 || std::abs(std::abs(x) - 1.0) < 1e-9) continue;
    const double exact = oracle::pitchfork_flow(x, 1.0);
    const double coarse = std::abs(at(MapSpec::pitchfork(1.0 / 8.0), x) - exact);
    const double fine = std::abs(at(MapSpec::pitchfork(1.0 / 16.0), x) - exact);
    if (coarse < 1e-13) continue;
    CHECK_MESSAGE(coarse / fine >= 8.0, "x0 = " << x);
  }
}

TEST_CASE("square_negative and affine maps") {
  const MapSpec s = MapSpec::square_negative();
  CHECK(at(s, -3.0) == 9.0);
  CHECK(at(s, 5.0) == 0.0);
  CHECK(at(s, at(s, -7.0)) == 0.0);

  const MapSpec a = MapSpec::affine(2, {0.0, 1.0, -1.0, 0.0}, {1.0, 2.0});
  const double pt[2] = {3.0, 4.0};
  const std::vector<double> y = eval_map(a, pt);
  CHECK(y[0] == 5.0);
  CHECK(y[1] == -1.0);
  CHECK_THROWS_AS(MapSpec::affine(2, {1.0}, {0.0, 0.0}), DimensionError);
  CHECK_THROWS_AS(eval_map(a, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("parse_map accepts every builtin form") {
  CHECK(at(parse_map("pitchfork"), 1.0) == doctest::Approx(1.0));
  CHECK(at(parse_map("sqneg"), -2.0) == 4.0);
  CHECK(at(parse_map("affine:0.5,1"), 2.0) == 2.0);
  CHECK(at(parse_map("id"), 3.5) == 3.5);
  CHECK(parse_map("id:3").dim() == 3);
  CHECK(at(parse_map("expr:x - x^3"), 2.0) == -6.0);
  CHECK(parse_map("expr:x1 + x2, x1 - x2").dim() == 2);
  CHECK(at(parse_map("compose:affine:2,0;sqneg"), -1.0) == 4.0);
  CHECK(at(parse_map("pitchfork:0.03125"), 2.0) == doctest::Approx(oracle::pitchfork_flow(2.0, 1.0)).epsilon(1e-6));
  CHECK_THROWS_AS(parse_map("nosuchmap"), ValidationError);
  CHECK_THROWS_AS(parse_map("expr:x +"), ParseError);
  CHECK_THROWS_AS(parse_map("compose:id:2;sqneg"), DimensionError);
  CHECK_THROWS_AS(parse_map("expr:sqrt(x)").dim() == 1 ? at(parse_map("expr:sqrt(x)"), -1.0) : 0.0, EvalError);
  for (const char* text : {"pitchfork", "sqneg", "affine:0.5,1", "id:2", "expr:x - x^3", "compose:affine:2,0;sqneg"}) {
    const MapSpec f = parse_map(text);
    CHECK(parse_map(f.describe()).describe() == f.describe());
  }
  CHECK(!builtin_maps().empty());
}

TEST_CASE("push_forward examples and functoriality") {
  const MapSpec s = MapSpec::square_negative();
  const DiscreteMeasure d = push_forward(DiscreteMeasure::dirac(Point{-2.0}), s);
  REQUIRE(d.size() == 1);
  CHECK(d.location(0)[0] == 4.0);

  const DiscreteMeasure pair = DiscreteMeasure::from_atoms({{Point{-1.0}, 0.5}, {Point{1.0}, 0.5}});
  const DiscreteMeasure img = push_forward(pair, s);
  CHECK(oracle::mass_at(img, {1.0}) == doctest::Approx(0.5));
  CHECK(oracle::mass_at(img, {0.0}) == doctest::Approx(0.5));

  const DiscreteMeasure merged = push_forward(DiscreteMeasure::from_atoms({{Point{1.0}, 0.5}, {Point{2.0}, 0.5}}), s);
  CHECK(merged.size() == 1);

  std::mt19937_64 rng(12);
  const MapSpec f = parse_map("expr:x/2 + 1"), g = MapSpec::pitchfork();
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteMeasure mu = oracle::random_measure(rng, 7, 1);
    const DiscreteMeasure two_step = push_forward(push_forward(mu, f), g);
    const DiscreteMeasure composed = push_forward(mu, MapSpec::compose({f, g}));
    REQUIRE(two_step.size() == composed.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < composed.size(); ++i) {
      CHECK(std::abs(two_step.location(i)[0] - composed.location(i)[0]) <= 1e-12);
      CHECK(std::abs(two_step.weight(i) - composed.weight(i)) <= 1e-15);
      mass += composed.weight(i);
    }
    CHECK(std::abs(mass - 1.0) <= 1e-12);
    CHECK(std::isfinite(wasserstein(push_forward(mu, g), push_forward(oracle::random_measure(rng, 4, 1), g), 2.0)));
  }
}

TEST_CASE("the discontinuity sequence for square_negative") {
  const MapSpec s = MapSpec::square_negative();
  const DiscreteMeasure origin = DiscreteMeasure::dirac(Point{0.0});
  for (double n : {10.0, 100.0, 1000.0}) {
    const double c = (1.0 + n) / (n * n);
    const DiscreteMeasure mu = mix(DiscreteMeasure::dirac(Point{-n}), origin, c / n);
    CHECK(wasserstein(mu, origin, 1.0) == doctest::Approx(c).epsilon(1e-12));
    CHECK(wasserstein(push_forward(mu, s), origin, 1.0) == doctest::Approx((1.0 + n) / n).epsilon(1e-12));
  }
  const double n = 10.0;
  const DiscreteMeasure mu10 = mix(DiscreteMeasure::dirac(Point{-n}), origin, (1.0 + n) / (n * n * n));
  CHECK(wasserstein(push_forward(mu10, s), origin, 1.0) == doctest::Approx(1.1));
  const DiscreteMeasure mu1000 = mix(DiscreteMeasure::dirac(Point{-1000.0}), origin, 1001.0 / 1e9);
  CHECK(wasserstein(mu1000, origin, 1.0) <= 0.002);
  CHECK(std::abs(wasserstein(push_forward(mu1000, s), origin, 1.0) - 1.0) <= 0.002);
}

TEST_CASE("growth_ratio_profile flags") {
  const std::vector<double> radii{10.0, 100.0, 1000.0};
  const GrowthProfile id = growth_ratio_profile(MapSpec::identity(), Point{0.0}, radii);
  for (const GrowthRow& r : id.rows) CHECK(r.max_ratio <= 1.0);
  CHECK_FALSE(id.unbounded_suspect);

  const GrowthProfile sq = growth_ratio_profile(MapSpec::square_negative(), Point{0.0}, radii);
  REQUIRE(sq.rows.size() == 3);
  CHECK(sq.rows[0].max_ratio == doctest::Approx(100.0 / 11.0).epsilon(1e-9));
  CHECK(sq.rows[1].max_ratio == doctest::Approx(1e4 / 101.0).epsilon(1e-9));
  CHECK(sq.rows[2].max_ratio == doctest::Approx(1e6 / 1001.0).epsilon(1e-9));
  CHECK(sq.unbounded_suspect);

  const GrowthProfile pf = growth_ratio_profile(MapSpec::pitchfork(), Point{0.0}, radii, 16, 5);
  for (const GrowthRow& r : pf.rows) CHECK(r.max_ratio <= 1.08);
  CHECK_FALSE(pf.unbounded_suspect);

  const GrowthProfile twice = growth_ratio_profile(MapSpec::pitchfork(), Point{0.0}, radii, 16, 5);
  for (std::size_t i = 0; i < radii.size(); ++i) CHECK(pf.rows[i].max_ratio == twice.rows[i].max_ratio);
  CHECK_THROWS_AS(growth_ratio_profile(MapSpec::identity(), Point{0.0}, std::vector<double>{2.0, 1.0}), ValidationError);
}

TEST_CASE("contraction_check examples") {
  const std::vector<double> radii{1.0, 10.0, 100.0};
  CHECK(contraction_check(MapSpec::scalar_affine(0.5, 0.0), Point{0.0}, 1, radii, 0.5, 33).all_pass);
  const ContractionReport sq = contraction_check(MapSpec::square_negative(), Point{0.0}, 2, radii, 0.0, 33, 1e-9);
  CHECK(sq.all_pass);
  for (const ContractionRow& r : sq.rows) CHECK(r.max_norm == 0.0);
  const std::vector<double> ten{10.0};
  const ContractionReport pf = contraction_check(MapSpec::pitchfork(), Point{0.0}, 3, ten, 0.5, 101);
  CHECK(pf.all_pass);
  CHECK(pf.rows[0].max_norm <= 1.01);
  CHECK_FALSE(contraction_check(MapSpec::scalar_affine(2.0, 0.0), Point{0.0}, 1, radii, 0.5, 11).all_pass);
  CHECK_THROWS_AS(contraction_check(MapSpec::identity(), Point{0.0}, 0, radii, 0.5, 5), ValidationError);
}

TEST_CASE("probe points lie in the ball") {
  for (std::size_t d : {1u, 2u, 3u}) {
    const Point c(std::vector<double>(d, 1.0));
    const std::vector<Point> pts = ball_probe_points(c, 2.0, 50);
    CHECK(pts.size() == 50);
    for (const Point& p : pts) CHECK(euclidean_distance(p.coords(), c.coords()) <= 2.0 + 1e-12);
  }
}

TEST_CASE("pitchfork attractor sampling") {
  const std::vector<Point> a = pitchfork_attractor(0.05);
  CHECK(a.size() == 41);
  CHECK(a.front()[0] == -1.0);
  CHECK(a.back()[0] == 1.0);
}
