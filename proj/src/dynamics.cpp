#include "wassdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "wassdyn/error.hpp"

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

double parse_number(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ValidationError(context + ": not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
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

std::size_t variant_dim(const MapSpec::Variant& v) {
  return std::visit(Overloaded{
                        [](const PitchforkTime1&) -> std::size_t { return 1; },
                        [](const SquareNegative&) -> std::size_t { return 1; },
                        [](const AffineMap& a) { return a.dim; },
                        [](const ExpressionMap& e) { return e.components.size(); },
                        [](const Composition& c) {
                          if (c.maps.empty()) throw ValidationError("composition needs at least one map");
                          const std::size_t d = c.maps.front().dim();
                          for (const MapSpec& m : c.maps) {
                            if (m.dim() != d) throw DimensionError("composition of maps with different dimensions");
                          }
                          return d;
                        },
                    },
                    v);
}

double pitchfork_rk4(double x, double step) {
  auto field = [](double y) { return y - y * y * y; };
  double t = 0.0;
  while (true) {
    const double stiffness = std::abs(1.0 - 3.0 * x * x);
    double h = step / std::max(1.0, stiffness / 4.0);
    const bool last = t + h >= 1.0 - 1e-14;
    if (last) h = 1.0 - t;
    const double k1 = field(x);
    const double k2 = field(x + 0.5 * h * k1);
    const double k3 = field(x + 0.5 * h * k2);
    const double k4 = field(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (last) break;
    t += h;
  }
  return x;
}

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

MapSpec::MapSpec(Variant v) : v_(std::move(v)), dim_(variant_dim(v_)) {
  if (const auto* p = std::get_if<PitchforkTime1>(&v_)) {
    if (!(p->step > 0.0 && p->step <= 1.0)) throw ValidationError("pitchfork step must lie in (0, 1]");
  }
  if (const auto* a = std::get_if<AffineMap>(&v_)) {
    if (a->dim == 0 || a->matrix.size() != a->dim * a->dim || a->offset.size() != a->dim) {
      throw DimensionError("affine map: matrix must be d x d and offset of length d");
    }
  }
}

MapSpec MapSpec::pitchfork(double step) { return MapSpec(PitchforkTime1{step}); }
MapSpec MapSpec::square_negative() { return MapSpec(SquareNegative{}); }

MapSpec MapSpec::affine(std::size_t dim, std::vector<double> matrix, std::vector<double> offset) {
  return MapSpec(AffineMap{dim, std::move(matrix), std::move(offset)});
}

MapSpec MapSpec::identity(std::size_t dim) {
  std::vector<double> a(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] = 1.0;
  return affine(dim, std::move(a), std::vector<double>(dim, 0.0));
}

MapSpec MapSpec::scalar_affine(double a, double b) { return affine(1, {a}, {b}); }

MapSpec MapSpec::expression(const std::string& components) {
  return MapSpec(ExpressionMap{parse_components(components), trim(components)});
}

MapSpec MapSpec::compose(std::vector<MapSpec> maps) {
  std::vector<MapSpec> flat;
  for (MapSpec& m : maps) {
    if (const auto* c = std::get_if<Composition>(&m.variant())) {
      flat.insert(flat.end(), c->maps.begin(), c->maps.end());
    } else {
      flat.push_back(std::move(m));
    }
  }
  return MapSpec(Composition{std::move(flat)});
}

std::string MapSpec::describe() const {
  return std::visit(Overloaded{
                        [](const PitchforkTime1& p) {
                          return p.step == 1.0 / 64.0 ? std::string("pitchfork") : "pitchfork:" + fmt(p.step);
                        },
                        [](const SquareNegative&) { return std::string("sqneg"); },
                        [](const AffineMap& a) {
                          std::string s = "affine:";
                          for (std::size_t i = 0; i < a.matrix.size(); ++i) s += (i ? "," : "") + fmt(a.matrix[i]);
                          for (double b : a.offset) s += "," + fmt(b);
                          return s;
                        },
                        [](const ExpressionMap& e) { return "expr:" + e.source; },
                        [](const Composition& c) {
                          std::string s = "compose:";
                          for (std::size_t i = 0; i < c.maps.size(); ++i) s += (i ? ";" : "") + c.maps[i].describe();
                          return s;
                        },
                    },
                    v_);
}

MapSpec parse_map(const std::string& raw) {
  const std::string text = trim(raw);
  const auto colon = text.find(':');
  const std::string head = colon == std::string::npos ? text : text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? std::string() : text.substr(colon + 1);

  if (head == "expr") return MapSpec::expression(rest);
  if (head == "compose") {
    std::vector<MapSpec> maps;
    for (const std::string& part : split(rest, ';')) maps.push_back(parse_map(part));
    return MapSpec::compose(std::move(maps));
  }
  if (head == "pitchfork") {
    return colon == std::string::npos ? MapSpec::pitchfork() : MapSpec::pitchfork(parse_number(trim(rest), "pitchfork step"));
  }
  if (head == "sqneg" && colon == std::string::npos) return MapSpec::square_negative();
  if (head == "id") {
    if (colon == std::string::npos) return MapSpec::identity(1);
    const double d = parse_number(trim(rest), "id dimension");
    if (d < 1 || d != std::floor(d)) throw ValidationError("id: dimension must be a positive integer");
    return MapSpec::identity(static_cast<std::size_t>(d));
  }
  if (head == "affine") {
    std::vector<double> vals;
    for (const std::string& part : split(rest, ',')) vals.push_back(parse_number(trim(part), "affine"));
    // k = d^2 + d coefficients.
    std::size_t d = 1;
    while (d * d + d < vals.size()) ++d;
    if (d * d + d != vals.size()) throw ValidationError("affine: expected d*d + d coefficients");
    std::vector<double> a(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(d * d));
    std::vector<double> b(vals.begin() + static_cast<std::ptrdiff_t>(d * d), vals.end());
    return MapSpec::affine(d, std::move(a), std::move(b));
  }
  throw ValidationError("unknown map '" + text + "' (see --list-builtins)");
}

std::vector<double> eval_map(const MapSpec& f, std::span<const double> x) {
  if (x.size() != f.dim()) throw DimensionError("eval_map: point dimension does not match the map");
  return std::visit(Overloaded{
                        [&](const PitchforkTime1& p) { return std::vector<double>{pitchfork_rk4(x[0], p.step)}; },
                        [&](const SquareNegative&) { return std::vector<double>{x[0] >= 0.0 ? 0.0 : x[0] * x[0]}; },
                        [&](const AffineMap& a) {
                          std::vector<double> y(a.offset);
                          for (std::size_t i = 0; i < a.dim; ++i) {
                            for (std::size_t j = 0; j < a.dim; ++j) y[i] += a.matrix[i * a.dim + j] * x[j];
                          }
                          return y;
                        },
                        [&](const ExpressionMap& e) {
                          std::vector<double> y;
                          y.reserve(e.components.size());
                          for (const ExprAst& c : e.components) y.push_back(eval_ast(c, x));
                          return y;
                        },
                        [&](const Composition& c) {
                          std::vector<double> y(x.begin(), x.end());
                          for (const MapSpec& m : c.maps) y = eval_map(m, y);
                          return y;
                        },
                    },
                    f.variant());
}

Point eval_map(const MapSpec& f, const Point& x) { return Point(eval_map(f, x.coords())); }

double pitchfork_flow_exact(double x0, double t) {
  const double e = std::exp(t);
  return x0 * e / std::sqrt(1.0 - x0 * x0 + x0 * x0 * e * e);
}

std::vector<Point> pitchfork_attractor(double spacing) {
  if (!(spacing > 0.0)) throw ValidationError("attractor spacing must be positive");
  const auto n = static_cast<std::size_t>(std::llround(2.0 / spacing));
  std::vector<Point> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(Point{-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n)});
  return out;
}

DiscreteMeasure push_forward(const DiscreteMeasure& mu, const MapSpec& f) {
  if (mu.dim() != f.dim()) throw DimensionError("push_forward: measure and map dimensions differ");
  std::vector<double> coords;
  coords.reserve(mu.coords().size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const std::vector<double> y = eval_map(f, mu.location(i));
    coords.insert(coords.end(), y.begin(), y.end());
  }
  return DiscreteMeasure::from_flat(mu.dim(), std::move(coords),
                                    std::vector<double>(mu.weights().begin(), mu.weights().end()));
}

GrowthProfile growth_ratio_profile(const MapSpec& f, const Point& x0, std::span<const double> radii,
                                   std::size_t samples_per_radius, std::uint64_t seed) {
  if (x0.dim() != f.dim()) throw DimensionError("growth_ratio_profile: dimension mismatch");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw ValidationError("radii must be positive and strictly increasing");
    }
  }
  const std::size_t d = x0.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto ratio_at = [&](std::span<const double> x) {
    const std::vector<double> y = eval_map(f, x);
    return euclidean_distance(y, x0.coords()) / (1.0 + euclidean_distance(x, x0.coords()));
  };

  GrowthProfile out;
  std::vector<double> x(d);
  for (double R : radii) {
    double best = ratio_at(x0.coords());
    constexpr int kShells = 32;
    for (int k = 0; k < kShells; ++k) {
      const double r = R * std::pow(10.0, -3.0 + 3.0 * k / (kShells - 1));
      for (std::size_t axis = 0; axis < d; ++axis) {
        for (double sign : {1.0, -1.0}) {
          std::copy(x0.coords().begin(), x0.coords().end(), x.begin());
          x[axis] += sign * r;
          best = std::max(best, ratio_at(x));
        }
      }
      for (std::size_t i = 0; i < d; ++i) x[i] = x0[i] + r / std::sqrt(static_cast<double>(d));
      best = std::max(best, ratio_at(x));
    }
    for (std::size_t s = 0; s < samples_per_radius; ++s) {
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        x[i] = gauss(rng);
        norm += x[i] * x[i];
      }
      norm = std::sqrt(norm);
      const double r = R * std::pow(unif(rng), 1.0 / static_cast<double>(d));
      for (std::size_t i = 0; i < d; ++i) x[i] = x0[i] + (norm > 0.0 ? r * x[i] / norm : 0.0);
      best = std::max(best, ratio_at(x));
    }
    out.rows.push_back({R, best});
  }
  if (out.rows.size() >= 2) {
    const std::size_t last = out.rows.size() - 1;
    const std::size_t ref = last >= 2 ? last - 2 : 0;
    out.unbounded_suspect = out.rows[last].max_ratio > 2.0 * out.rows[ref].max_ratio;
  }
  return out;
}

std::vector<Point> ball_probe_points(const Point& x0, double R, std::size_t count) {
  const std::size_t d = x0.dim();
  std::vector<Point> pts;
  if (count == 0) return pts;
  if (d == 1) {
    if (count == 1) return {x0};
    for (std::size_t k = 0; k < count; ++k) {
      pts.push_back(Point{x0[0] - R + 2.0 * R * static_cast<double>(k) / static_cast<double>(count - 1)});
    }
    return pts;
  }
  if (d > std::size(kPrimes)) throw DimensionError("ball_probe_points supports dimension <= 16");
  std::vector<double> x(d);
  for (std::size_t axis = 0; axis < d && pts.size() < count; ++axis) {
    for (double sign : {1.0, -1.0}) {
      std::copy(x0.coords().begin(), x0.coords().end(), x.begin());
      x[axis] += sign * R;
      if (pts.size() < count) pts.emplace_back(x);
    }
  }
  for (std::size_t index = 1; pts.size() < count; ++index) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = 2.0 * radical_inverse(index, kPrimes[i]) - 1.0;
      norm2 += x[i] * x[i];
    }
    if (norm2 > 1.0) continue;
    for (std::size_t i = 0; i < d; ++i) x[i] = x0[i] + R * x[i];
    pts.emplace_back(x);
  }
  return pts;
}

ContractionReport contraction_check(const MapSpec& f, const Point& x0, std::size_t m,
                                    std::span<const double> radii, double c, std::size_t samples,
                                    std::optional<double> fixed_bound) {
  if (m < 1) throw ValidationError("contraction_check: m must be >= 1");
  if (!(c >= 0.0 && c < 1.0)) throw ValidationError("contraction_check: c must lie in [0, 1)");
  if (x0.dim() != f.dim()) throw DimensionError("contraction_check: dimension mismatch");
  ContractionReport out;
  out.all_pass = true;
  for (double R : radii) {
    ContractionRow row;
    row.radius = R;
    row.threshold = fixed_bound ? *fixed_bound : c * R;
    for (const Point& p : ball_probe_points(x0, R, samples)) {
      std::vector<double> y(p.coords().begin(), p.coords().end());
      for (std::size_t k = 0; k < m; ++k) y = eval_map(f, y);
      row.max_norm = std::max(row.max_norm, euclidean_distance(y, x0.coords()));
    }
    row.pass = row.max_norm <= row.threshold;
    out.all_pass = out.all_pass && row.pass;
    out.rows.push_back(row);
  }
  return out;
}

std::vector<std::string> builtin_maps() {
  return {
      "pitchfork[:STEP]   time-one map of x' = x - x^3 (RK4, nominal step 1/64)",
      "sqneg              f(x) = 0 for x >= 0, x^2 for x < 0",
      "id[:D]             identity on R^D",
      "affine:a,b         x -> a x + b; affine:a11,..,add,b1,..,bd in R^d",
      "expr:E1[,E2,...]   component expressions in x1..xd (x aliases x1)",
      "compose:M1;M2;...  apply M1, then M2, ...",
  };
}

}  // namespace wassdyn
