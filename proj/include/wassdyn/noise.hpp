#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wassdyn/dynamics.hpp"
#include "wassdyn/measure.hpp"

namespace wassdyn {

class KernelSpec;

struct DeterministicKernel {
  MapSpec map;
};

/// Additive Gaussian noise after `map`, discretized at the midpoint
/// quantiles Phi^-1((i - 1/2)/n) on each axis (grid product in R^d).
struct GaussianKernel {
  MapSpec map;
  double sigma = 0.0;
  std::size_t n_quantiles = 64;
  std::shared_ptr<const std::vector<double>> offsets;  // flat, per-atom offsets of unit sigma
};

/// Uniform noise in the closed ball of radius `radius` around map(x).
struct BallKernel {
  MapSpec map;
  double radius = 0.0;
  std::size_t n_points = 16;
  std::shared_ptr<const std::vector<double>> offsets;  // flat, unit-ball pattern
};

/// (1 - a(x)) delta_{f(x)} + a(x) delta_{x0}, a(x) = eps^p / (1 + |f(x) - x0|^p),
/// capped at 1.
struct CollapseKernel {
  MapSpec map;
  Point x0;
  double epsilon = 0.0;
  double p = 1.0;
};

struct MixtureKernel {
  std::vector<std::pair<KernelSpec, double>> components;  // normalized weights
};

/// Markov kernel x -> p(dy|x) whose values are discrete measures.
class KernelSpec {
 public:
  using Variant = std::variant<DeterministicKernel, GaussianKernel, BallKernel, CollapseKernel, MixtureKernel>;

  static KernelSpec deterministic(MapSpec f);
  static KernelSpec gaussian(MapSpec f, double sigma, std::size_t n_quantiles = 64);
  static KernelSpec ball(MapSpec f, double radius, std::size_t n_points = 16);
  static KernelSpec collapse(MapSpec f, Point x0, double epsilon, double p = 1.0);
  static KernelSpec mixture(std::vector<std::pair<KernelSpec, double>> components);

  std::size_t dim() const { return dim_; }
  const Variant& variant() const { return v_; }
  /// Canonical text form accepted by parse_kernel.
  std::string describe() const;

 private:
  explicit KernelSpec(Variant v, std::size_t dim) : v_(std::move(v)), dim_(dim) {}
  Variant v_;
  std::size_t dim_ = 1;
};

/// `det(MAP)`, `gauss(MAP,sigma=S,n=N)`, `ball(MAP,r=R,n=N)`,
/// `collapse(MAP,x0=X,eps=E,p=P)` and `mix(K1@w1,K2@w2,...)`. X is a number
/// or a parenthesized list `(a,b,...)`; omitted x0 is the origin.
KernelSpec parse_kernel(const std::string& text);

std::vector<std::string> builtin_kernels();

inline constexpr std::size_t kMaxGaussianProductAtoms = 4096;
inline constexpr std::size_t kMaxExactSupport = 512;

/// Markov-Wasserstein operator mu -> integral p(dy|x) dmu(x) of order p.
/// A compression cap of 0 disables compression.
struct MWOperator {
  KernelSpec kernel;
  std::size_t compression_cap = 256;
  double p = 1.0;
};

DiscreteMeasure kernel_atom(const KernelSpec& k, std::span<const double> x);
DiscreteMeasure kernel_atom(const KernelSpec& k, const Point& x);

struct ApplyResult {
  DiscreteMeasure measure;
  double compression_bound = 0.0;  // upper bound on w_p(uncompressed, measure)
};

/// Mixes the kernel atoms in input-atom order, then compresses to the cap.
ApplyResult apply_kernel_with_bound(const MWOperator& op, const DiscreteMeasure& mu);
DiscreteMeasure apply_kernel(const MWOperator& op, const DiscreteMeasure& mu);

struct NoiseLevel {
  double estimate = 0.0;
  std::optional<double> analytic_bound;
};

/// max over the samples of w_p(p(dy|x), delta_{f(x)}), computed as a moment
/// about f(x). The analytic bound assumes `f` is the kernel's base map.
NoiseLevel noise_level(const MWOperator& op, const MapSpec& f, std::span<const Point> sample_points);

/// Sum_i w_i w_p(p(dy|x_i), delta_{f(x_i)})^p.
double pointwise_noise_integral(const MWOperator& op, const MapSpec& f, const DiscreteMeasure& mu);

/// w_p(P mu, f_* mu) with compression disabled, by the network simplex.
/// Throws SolverError when either support exceeds kMaxExactSupport.
double operator_gap(const MWOperator& op, const MapSpec& f, const DiscreteMeasure& mu);

/// E|Z|^p for a standard normal Z in R^dim, by adaptive Gauss-Kronrod
/// quadrature of the chi density (relative tolerance 1e-10, cached).
double gaussian_abs_moment(double p, std::size_t dim = 1);

/// Noise level sigma * (E|Z|^p)^(1/p) of continuous Gaussian noise in order p.
double gaussian_noise_level(double sigma, double p, std::size_t dim = 1);

}  // namespace wassdyn
