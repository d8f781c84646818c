#include "wassdyn/noise.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>

#include "wassdyn/error.hpp"
#include "wassdyn/transport.hpp"

namespace wassdyn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double standard_normal_quantile(double q) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q); }

std::vector<double> gaussian_offsets(std::size_t dim, std::size_t n) {
  std::size_t per_axis = n;
  while (per_axis > 2 && std::pow(static_cast<double>(per_axis), static_cast<double>(dim)) >
                             static_cast<double>(kMaxGaussianProductAtoms)) {
    --per_axis;
  }
  std::vector<double> q(per_axis);
  for (std::size_t i = 0; i < per_axis; ++i) {
    q[i] = standard_normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(per_axis));
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim; ++k) total *= per_axis;
  std::vector<double> out(total * dim);
  for (std::size_t a = 0; a < total; ++a) {
    std::size_t rem = a;
    for (std::size_t k = 0; k < dim; ++k) {
      out[a * dim + k] = q[rem % per_axis];
      rem /= per_axis;
    }
  }
  return out;
}

// Low-discrepancy points in the closed unit ball.
std::vector<double> ball_offsets(std::size_t dim, std::size_t n) {
  std::vector<double> out;
  out.reserve(n * dim);
  if (n == 1) return std::vector<double>(dim, 0.0);
  if (dim == 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n) - 1.0);
    return out;
  }
  for (const Point& p : ball_probe_points(Point(std::vector<double>(dim, 0.0)), 1.0, n)) {
    out.insert(out.end(), p.coords().begin(), p.coords().end());
  }
  return out;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be a positive finite number");
}

// Appends weight-scaled atoms of p(dy|x) to flat buffers.
void append_atoms(const KernelSpec& k, std::span<const double> x, double weight, std::vector<double>& coords,
                  std::vector<double>& weights) {
  const std::size_t d = k.dim();
  std::visit(Overloaded{
                 [&](const DeterministicKernel& dk) {
                   const std::vector<double> y = eval_map(dk.map, x);
                   coords.insert(coords.end(), y.begin(), y.end());
                   weights.push_back(weight);
                 },
                 [&](const GaussianKernel& g) {
                   const std::vector<double> y = eval_map(g.map, x);
                   const std::vector<double>& off = *g.offsets;
                   const std::size_t count = off.size() / d;
                   const double w = weight / static_cast<double>(count);
                   for (std::size_t a = 0; a < count; ++a) {
                     for (std::size_t i = 0; i < d; ++i) coords.push_back(y[i] + g.sigma * off[a * d + i]);
                     weights.push_back(w);
                   }
                 },
                 [&](const BallKernel& b) {
                   const std::vector<double> y = eval_map(b.map, x);
                   const std::vector<double>& off = *b.offsets;
                   const std::size_t count = off.size() / d;
                   const double w = weight / static_cast<double>(count);
                   for (std::size_t a = 0; a < count; ++a) {
                     for (std::size_t i = 0; i < d; ++i) coords.push_back(y[i] + b.radius * off[a * d + i]);
                     weights.push_back(w);
                   }
                 },
                 [&](const CollapseKernel& c) {
                   const std::vector<double> y = eval_map(c.map, x);
                   const double dist = euclidean_distance(y, c.x0.coords());
                   const double a = std::min(1.0, std::pow(c.epsilon, c.p) / (1.0 + std::pow(dist, c.p)));
                   coords.insert(coords.end(), y.begin(), y.end());
                   weights.push_back(weight * (1.0 - a));
                   coords.insert(coords.end(), c.x0.coords().begin(), c.x0.coords().end());
                   weights.push_back(weight * a);
                 },
                 [&](const MixtureKernel& m) {
                   for (const auto& [component, lambda] : m.components) {
                     append_atoms(component, x, weight * lambda, coords, weights);
                   }
                 },
             },
             k.variant());
}

std::vector<std::string> split_top_level(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ValidationError("kernel: bad value for " + what + ": '" + s + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& raw, const std::string& what) {
  const double v = parse_real(raw, what);
  if (v < 1 || v != std::floor(v)) throw ValidationError("kernel: " + what + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

bool is_option(const std::string& field, std::string& key, std::string& value) {
  const auto eq = field.find('=');
  if (eq == std::string::npos) return false;
  key = trim(field.substr(0, eq));
  value = trim(field.substr(eq + 1));
  return key == "sigma" || key == "n" || key == "r" || key == "x0" || key == "eps" || key == "p";
}

std::string point_text(const Point& x) {
  if (x.dim() == 1) return fmt(x[0]);
  std::string s = "(";
  for (std::size_t i = 0; i < x.dim(); ++i) s += (i ? "," : "") + fmt(x[i]);
  return s + ")";
}

}  // namespace

KernelSpec KernelSpec::deterministic(MapSpec f) {
  const std::size_t d = f.dim();
  return KernelSpec(DeterministicKernel{std::move(f)}, d);
}

KernelSpec KernelSpec::gaussian(MapSpec f, double sigma, std::size_t n_quantiles) {
  require_positive(sigma, "gaussian sigma");
  if (n_quantiles < 2) throw ValidationError("gaussian kernel needs n >= 2 quantiles");
  const std::size_t d = f.dim();
  auto offsets = std::make_shared<const std::vector<double>>(gaussian_offsets(d, n_quantiles));
  return KernelSpec(GaussianKernel{std::move(f), sigma, n_quantiles, std::move(offsets)}, d);
}

KernelSpec KernelSpec::ball(MapSpec f, double radius, std::size_t n_points) {
  require_positive(radius, "ball radius");
  if (n_points < 1) throw ValidationError("ball kernel needs n >= 1 points");
  const std::size_t d = f.dim();
  auto offsets = std::make_shared<const std::vector<double>>(ball_offsets(d, n_points));
  return KernelSpec(BallKernel{std::move(f), radius, n_points, std::move(offsets)}, d);
}

KernelSpec KernelSpec::collapse(MapSpec f, Point x0, double epsilon, double p) {
  require_positive(epsilon, "collapse eps");
  if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("collapse p must be a finite real >= 1");
  if (x0.dim() != f.dim()) throw DimensionError("collapse: x0 dimension does not match the map");
  const std::size_t d = f.dim();
  return KernelSpec(CollapseKernel{std::move(f), std::move(x0), epsilon, p}, d);
}

KernelSpec KernelSpec::mixture(std::vector<std::pair<KernelSpec, double>> components) {
  if (components.empty()) throw ValidationError("mixture needs at least one component");
  const std::size_t d = components.front().first.dim();
  double total = 0.0;
  for (const auto& [k, w] : components) {
    if (k.dim() != d) throw DimensionError("mixture components have different dimensions");
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("mixture weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("mixture weights must not all vanish");
  for (auto& c : components) c.second /= total;
  return KernelSpec(MixtureKernel{std::move(components)}, d);
}

std::string KernelSpec::describe() const {
  return std::visit(Overloaded{
                        [](const DeterministicKernel& k) { return "det(" + k.map.describe() + ")"; },
                        [](const GaussianKernel& k) {
                          return "gauss(" + k.map.describe() + ",sigma=" + fmt(k.sigma) +
                                 ",n=" + std::to_string(k.n_quantiles) + ")";
                        },
                        [](const BallKernel& k) {
                          return "ball(" + k.map.describe() + ",r=" + fmt(k.radius) + ",n=" + std::to_string(k.n_points) +
                                 ")";
                        },
                        [](const CollapseKernel& k) {
                          return "collapse(" + k.map.describe() + ",x0=" + point_text(k.x0) + ",eps=" + fmt(k.epsilon) +
                                 ",p=" + fmt(k.p) + ")";
                        },
                        [](const MixtureKernel& k) {
                          std::string s = "mix(";
                          for (std::size_t i = 0; i < k.components.size(); ++i) {
                            s += (i ? "," : "") + k.components[i].first.describe() + "@" + fmt(k.components[i].second);
                          }
                          return s + ")";
                        },
                    },
                    v_);
}

KernelSpec parse_kernel(const std::string& raw) {
  const std::string text = trim(raw);
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')') {
    throw ValidationError("kernel: expected NAME(...), got '" + text + "'");
  }
  const std::string name = trim(text.substr(0, open));
  const std::string body = text.substr(open + 1, text.size() - open - 2);

  if (name == "mix") {
    std::vector<std::pair<KernelSpec, double>> comps;
    for (const std::string& part : split_top_level(body, ',')) {
      const auto at = part.rfind('@');
      if (at == std::string::npos) throw ValidationError("kernel: mixture component needs '@weight': '" + part + "'");
      comps.emplace_back(parse_kernel(part.substr(0, at)), parse_real(part.substr(at + 1), "mixture weight"));
    }
    return KernelSpec::mixture(std::move(comps));
  }

  std::string map_text;
  std::map<std::string, std::string> opts;
  bool in_options = false;
  for (const std::string& field : split_top_level(body, ',')) {
    std::string key, value;
    if (is_option(field, key, value)) {
      if (opts.count(key)) throw ValidationError("kernel: duplicate option '" + key + "'");
      opts[key] = value;
      in_options = true;
      continue;
    }
    if (in_options) throw ValidationError("kernel: map must precede options: '" + field + "'");
    map_text += (map_text.empty() ? "" : ",") + field;
  }
  if (trim(map_text).empty()) throw ValidationError("kernel: missing map in '" + text + "'");
  MapSpec f = parse_map(map_text);

  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : opts) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) throw ValidationError("kernel " + name + ": unexpected option '" + k + "'");
    }
  };

  if (name == "det") {
    allow({});
    return KernelSpec::deterministic(std::move(f));
  }
  if (name == "gauss") {
    allow({"sigma", "n"});
    if (!opts.count("sigma")) throw ValidationError("gauss kernel requires sigma=");
    return KernelSpec::gaussian(std::move(f), parse_real(opts["sigma"], "sigma"),
                                opts.count("n") ? parse_count(opts["n"], "n") : 64);
  }
  if (name == "ball") {
    allow({"r", "n"});
    if (!opts.count("r")) throw ValidationError("ball kernel requires r=");
    return KernelSpec::ball(std::move(f), parse_real(opts["r"], "r"), opts.count("n") ? parse_count(opts["n"], "n") : 16);
  }
  if (name == "collapse") {
    allow({"x0", "eps", "p"});
    if (!opts.count("eps")) throw ValidationError("collapse kernel requires eps=");
    std::vector<double> x0(f.dim(), 0.0);
    if (opts.count("x0")) {
      std::string v = trim(opts["x0"]);
      if (!v.empty() && v.front() == '(' && v.back() == ')') v = v.substr(1, v.size() - 2);
      x0.clear();
      for (const std::string& c : split_top_level(v, ',')) x0.push_back(parse_real(c, "x0"));
    }
    return KernelSpec::collapse(std::move(f), Point(std::move(x0)), parse_real(opts["eps"], "eps"),
                                opts.count("p") ? parse_real(opts["p"], "p") : 1.0);
  }
  throw ValidationError("unknown kernel '" + name + "' (see --list-builtins)");
}

std::vector<std::string> builtin_kernels() {
  return {
      "det(MAP)                         deterministic transfer, delta_{f(x)}",
      "gauss(MAP,sigma=S,n=N)           Gaussian noise, N midpoint quantiles per axis (default 64)",
      "ball(MAP,r=R,n=N)                uniform noise in the closed R-ball (default 16 points)",
      "collapse(MAP,x0=X,eps=E,p=P)     mass a(x) = E^P/(1+|f(x)-X|^P) jumps to X",
      "mix(K1@w1,K2@w2,...)             convex combination of kernels",
  };
}

DiscreteMeasure kernel_atom(const KernelSpec& k, std::span<const double> x) {
  if (x.size() != k.dim()) throw DimensionError("kernel_atom: point dimension does not match the kernel");
  std::vector<double> coords;
  std::vector<double> weights;
  append_atoms(k, x, 1.0, coords, weights);
  return DiscreteMeasure::from_flat(k.dim(), std::move(coords), std::move(weights));
}

DiscreteMeasure kernel_atom(const KernelSpec& k, const Point& x) { return kernel_atom(k, x.coords()); }

ApplyResult apply_kernel_with_bound(const MWOperator& op, const DiscreteMeasure& mu) {
  if (mu.dim() != op.kernel.dim()) throw DimensionError("apply_kernel: measure and kernel dimensions differ");
  std::vector<double> coords;
  std::vector<double> weights;
  for (std::size_t i = 0; i < mu.size(); ++i) append_atoms(op.kernel, mu.location(i), mu.weight(i), coords, weights);
  DiscreteMeasure image = DiscreteMeasure::from_flat(mu.dim(), std::move(coords), std::move(weights));
  if (op.compression_cap == 0) return {std::move(image), 0.0};
  CompressResult c = compress(image, op.compression_cap, op.p);
  return {std::move(c.measure), c.bound};
}

DiscreteMeasure apply_kernel(const MWOperator& op, const DiscreteMeasure& mu) {
  return apply_kernel_with_bound(op, mu).measure;
}

namespace {

std::optional<double> analytic_noise_bound(const KernelSpec& k, double p) {
  return std::visit(Overloaded{
                        [](const DeterministicKernel&) -> std::optional<double> { return 0.0; },
                        [&](const GaussianKernel& g) -> std::optional<double> {
                          return gaussian_noise_level(g.sigma, p, g.map.dim());
                        },
                        [](const BallKernel& b) -> std::optional<double> { return b.radius; },
                        [&](const CollapseKernel& c) -> std::optional<double> {
                          // w_q <= w_p for q <= p, so eps bounds every lower order.
                          if (p <= c.p) return c.epsilon;
                          return std::nullopt;
                        },
                        [&](const MixtureKernel& m) -> std::optional<double> {
                          double s = 0.0;
                          for (const auto& [comp, lambda] : m.components) {
                            const auto b = analytic_noise_bound(comp, p);
                            if (!b) return std::nullopt;
                            s += lambda * std::pow(*b, p);
                          }
                          return std::pow(s, 1.0 / p);
                        },
                    },
                    k.variant());
}

double pointwise_noise_power(const MWOperator& op, const MapSpec& f, std::span<const double> x) {
  const DiscreteMeasure atom = kernel_atom(op.kernel, x);
  return moment_p(atom, Point(eval_map(f, x)), op.p);
}

}  // namespace

NoiseLevel noise_level(const MWOperator& op, const MapSpec& f, std::span<const Point> sample_points) {
  if (sample_points.empty()) throw ValidationError("noise_level: sample points must be nonempty");
  if (f.dim() != op.kernel.dim()) throw DimensionError("noise_level: map and kernel dimensions differ");
  NoiseLevel out;
  for (const Point& x : sample_points) {
    out.estimate = std::max(out.estimate, std::pow(pointwise_noise_power(op, f, x.coords()), 1.0 / op.p));
  }
  out.analytic_bound = analytic_noise_bound(op.kernel, op.p);
  return out;
}

double pointwise_noise_integral(const MWOperator& op, const MapSpec& f, const DiscreteMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * pointwise_noise_power(op, f, mu.location(i));
  return s;
}

double operator_gap(const MWOperator& op, const MapSpec& f, const DiscreteMeasure& mu) {
  MWOperator uncapped = op;
  uncapped.compression_cap = 0;
  const DiscreteMeasure image = apply_kernel(uncapped, mu);
  const DiscreteMeasure pushed = push_forward(mu, f);
  if (image.size() > kMaxExactSupport || pushed.size() > kMaxExactSupport) {
    throw SolverError("operator_gap: support of " + std::to_string(image.size()) +
                      " atoms exceeds the exact solver limit of " + std::to_string(kMaxExactSupport) +
                      "; subsample the input measure");
  }
  return wasserstein_exact(image, pushed, op.p).distance;
}

double gaussian_abs_moment(double p, std::size_t dim) {
  if (!(p >= 0.0) || dim == 0) throw ValidationError("gaussian_abs_moment: need p >= 0 and dim >= 1");
  static std::mutex mutex;
  static std::map<std::pair<double, std::size_t>, double> cache;
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find({p, dim}); it != cache.end()) return it->second;
  }
  const double k = static_cast<double>(dim);
  const double log_norm = (k / 2.0 - 1.0) * std::log(2.0) + std::lgamma(k / 2.0);
  // Chi density of |Z|: r^(k-1) exp(-r^2/2) / (2^(k/2-1) Gamma(k/2)).
  auto integrand = [&](double r) {
    if (r <= 0.0) return 0.0;
    return std::exp((p + k - 1.0) * std::log(r) - 0.5 * r * r - log_norm);
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-10, &error);
  std::lock_guard<std::mutex> lock(mutex);
  cache[{p, dim}] = value;
  return value;
}

double gaussian_noise_level(double sigma, double p, std::size_t dim) {
  return sigma * std::pow(gaussian_abs_moment(p, dim), 1.0 / p);
}

}  // namespace wassdyn
