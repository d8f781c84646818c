#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wassdyn/expr.hpp"
#include "wassdyn/measure.hpp"

namespace wassdyn {

class MapSpec;

/// Time-one map of x' = x - x^3 by classical RK4. `step` is the nominal step;
/// it is shortened where |1 - 3x^2| > 4 so the scheme stays accurate on
/// large initial values.
struct PitchforkTime1 {
  double step = 1.0 / 64.0;
};

/// f(x) = 0 for x >= 0, x^2 for x < 0. Continuous, f(f(x)) = 0, but its
/// transfer operator is discontinuous on every Wasserstein space.
struct SquareNegative {};

/// x -> A x + b, A stored row-major.
struct AffineMap {
  std::size_t dim = 1;
  std::vector<double> matrix;
  std::vector<double> offset;
};

struct ExpressionMap {
  std::vector<ExprAst> components;
  std::string source;
};

/// Applies `maps` left to right.
struct Composition {
  std::vector<MapSpec> maps;
};

class MapSpec {
 public:
  using Variant = std::variant<PitchforkTime1, SquareNegative, AffineMap, ExpressionMap, Composition>;

  MapSpec(Variant v);

  static MapSpec pitchfork(double step = 1.0 / 64.0);
  static MapSpec square_negative();
  static MapSpec affine(std::size_t dim, std::vector<double> matrix, std::vector<double> offset);
  static MapSpec identity(std::size_t dim = 1);
  /// 1-D x -> a x + b.
  static MapSpec scalar_affine(double a, double b);
  static MapSpec expression(const std::string& components);
  static MapSpec compose(std::vector<MapSpec> maps);

  std::size_t dim() const { return dim_; }
  const Variant& variant() const { return v_; }
  /// Canonical text form accepted by parse_map.
  std::string describe() const;

 private:
  Variant v_;
  std::size_t dim_ = 1;
};

/// `pitchfork[:STEP]`, `sqneg`, `id[:D]`, `affine:a,b` (1-D) or
/// `affine:a11,...,add,b1,...,bd`, `expr:E1[,E2...]`, `compose:M1;M2;...`.
MapSpec parse_map(const std::string& text);

std::vector<double> eval_map(const MapSpec& f, std::span<const double> x);
Point eval_map(const MapSpec& f, const Point& x);

/// x0 e / sqrt(1 - x0^2 + x0^2 e^2), the exact time-one flow of x' = x - x^3.
double pitchfork_flow_exact(double x0, double t = 1.0);

/// Sampled global attractor [-1, 1] of the pitchfork flow.
std::vector<Point> pitchfork_attractor(double spacing = 0.05);

/// Atomwise image f_* mu; coincident images are merged.
DiscreteMeasure push_forward(const DiscreteMeasure& mu, const MapSpec& f);

struct GrowthRow {
  double radius = 0.0;
  double max_ratio = 0.0;
};

struct GrowthProfile {
  std::vector<GrowthRow> rows;
  /// Heuristic flag: the ratio grew by more than a factor 2 over the last
  /// three radii. A finite scan never proves boundedness.
  bool unbounded_suspect = false;
};

/// Estimates sup |f(x) - x0| / (1 + |x - x0|) over balls B_R(x0).
///
/// Each radius is scanned on 32 log-spaced shells from R/1000 to R with
/// 2d+1 lattice points per shell (the center included), plus
/// `samples_per_radius` seeded uniform points in the ball.
GrowthProfile growth_ratio_profile(const MapSpec& f, const Point& x0, std::span<const double> radii,
                                   std::size_t samples_per_radius = 0, std::uint64_t seed = 0);

struct ContractionRow {
  double radius = 0.0;
  double max_norm = 0.0;   // max |f^m(x) - x0| over the probe points
  double threshold = 0.0;  // c R, or the fixed finite-time bound
  bool pass = false;
};

struct ContractionReport {
  std::vector<ContractionRow> rows;
  bool all_pass = false;
};

/// Checks f^m(B_R) in B_{cR} for each R on `samples` deterministic probe
/// points. With `fixed_bound` set, checks f^m(B_R) in B_{fixed_bound}
/// instead (finite-time compactness).
ContractionReport contraction_check(const MapSpec& f, const Point& x0, std::size_t m,
                                    std::span<const double> radii, double c, std::size_t samples,
                                    std::optional<double> fixed_bound = std::nullopt);

/// Deterministic probe points in the closed ball B_R(x0): an evenly spaced
/// grid on the line, axis points plus a Halton sequence otherwise.
std::vector<Point> ball_probe_points(const Point& x0, double R, std::size_t count);

/// Names of the builtin maps, one per element with a short description.
std::vector<std::string> builtin_maps();

}  // namespace wassdyn
