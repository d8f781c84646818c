#include "wassdyn/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

#include "wassdyn/error.hpp"

namespace wassdyn {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw ValidationError(std::string("non-finite ") + what);
  }
}

void require_order(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("order p must be a finite real >= 1");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

Point::Point(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw DimensionError("point must have dimension >= 1");
  require_finite(coords_, "coordinate");
}

Point::Point(std::initializer_list<double> coords) : Point(std::vector<double>(coords)) {}

Point::Point(std::span<const double> coords) : Point(std::vector<double>(coords.begin(), coords.end())) {}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::abs(a[0] - b[0]);
  return std::sqrt(squared_distance(a, b));
}

DiscreteMeasure DiscreteMeasure::from_atoms(std::span<const Atom> atoms) {
  if (atoms.empty()) throw ConstructionError("measure needs at least one atom");
  const std::size_t dim = atoms.front().location.dim();
  std::vector<double> coords;
  std::vector<double> weights;
  coords.reserve(atoms.size() * dim);
  weights.reserve(atoms.size());
  for (const Atom& a : atoms) {
    if (a.location.dim() != dim) throw DimensionError("atoms have inconsistent dimensions");
    coords.insert(coords.end(), a.location.coords().begin(), a.location.coords().end());
    weights.push_back(a.weight);
  }
  return from_flat(dim, std::move(coords), std::move(weights));
}

DiscreteMeasure DiscreteMeasure::from_atoms(std::initializer_list<Atom> atoms) {
  return from_atoms(std::span<const Atom>(atoms.begin(), atoms.size()));
}

DiscreteMeasure DiscreteMeasure::from_flat(std::size_t dim, std::vector<double> coords,
                                           std::vector<double> weights) {
  if (dim == 0) throw DimensionError("dimension must be >= 1");
  if (coords.size() != dim * weights.size()) throw DimensionError("coordinate buffer size mismatch");
  require_finite(coords, "coordinate");
  for (double w : weights) {
    if (std::isnan(w) || !std::isfinite(w)) throw ValidationError("non-finite weight");
    if (w < 0.0) throw ValidationError("negative weight");
  }

  const std::size_t n = weights.size();
  std::vector<std::size_t> live;
  live.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] > 0.0) live.push_back(i);
  }
  if (live.empty()) throw ConstructionError("measure has no atom with positive weight");

  auto loc = [&](std::size_t i) { return std::span<const double>(coords).subspan(i * dim, dim); };

  // Group atoms closer than kMergeTolerance. Sorting by the first coordinate
  // bounds the scan window; the group keeps the lowest original index.
  std::vector<std::size_t> order = live;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto la = loc(a);
    const auto lb = loc(b);
    if (la[0] != lb[0]) return la[0] < lb[0];
    return a < b;
  });
  std::vector<std::size_t> group(n, n);
  const double tol2 = kMergeTolerance * kMergeTolerance;
  for (std::size_t s = 0; s < order.size(); ++s) {
    const std::size_t i = order[s];
    if (group[i] != n) continue;
    std::size_t rep = i;
    std::vector<std::size_t> members{i};
    for (std::size_t t = s + 1; t < order.size(); ++t) {
      const std::size_t k = order[t];
      if (loc(k)[0] - loc(i)[0] >= kMergeTolerance) break;
      if (group[k] != n) continue;
      if (squared_distance(loc(i), loc(k)) < tol2) {
        members.push_back(k);
        rep = std::min(rep, k);
      }
    }
    for (std::size_t k : members) group[k] = rep;
  }

  std::vector<double> merged_weight(n, 0.0);
  for (std::size_t i : live) merged_weight[group[i]] += weights[i];

  std::vector<double> out_coords;
  std::vector<double> out_weights;
  double total = 0.0;
  for (std::size_t i : live) {
    if (group[i] != i) continue;
    out_coords.insert(out_coords.end(), loc(i).begin(), loc(i).end());
    out_weights.push_back(merged_weight[i]);
    total += merged_weight[i];
  }
  for (double& w : out_weights) w /= total;
  return DiscreteMeasure(dim, std::move(out_coords), std::move(out_weights));
}

DiscreteMeasure DiscreteMeasure::dirac(const Point& x) {
  if (x.dim() == 0) throw DimensionError("point must have dimension >= 1");
  return DiscreteMeasure(x.dim(), std::vector<double>(x.coords().begin(), x.coords().end()), {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(std::span<const Point> points) {
  std::vector<Atom> atoms;
  atoms.reserve(points.size());
  for (const Point& p : points) atoms.push_back({p, 1.0});
  return from_atoms(atoms);
}

std::vector<Atom> DiscreteMeasure::atoms() const {
  std::vector<Atom> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back({point(i), weights_[i]});
  return out;
}

double moment_p(const DiscreteMeasure& mu, const Point& x0, double p) {
  require_order(p);
  if (x0.dim() != mu.dim()) throw DimensionError("moment_p: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s += mu.weight(i) * std::pow(euclidean_distance(mu.location(i), x0.coords()), p);
  }
  return s;
}

DiscreteMeasure mix(const DiscreteMeasure& first, const DiscreteMeasure& second, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("mix: t must lie in [0, 1]");
  if (first.dim() != second.dim()) throw DimensionError("mix: dimension mismatch");
  std::vector<double> coords(first.coords().begin(), first.coords().end());
  coords.insert(coords.end(), second.coords().begin(), second.coords().end());
  std::vector<double> weights;
  weights.reserve(first.size() + second.size());
  for (double w : first.weights()) weights.push_back(t * w);
  for (double w : second.weights()) weights.push_back((1.0 - t) * w);
  return DiscreteMeasure::from_flat(first.dim(), std::move(coords), std::move(weights));
}

namespace {

struct Clusters {
  std::vector<std::size_t> parent;

  explicit Clusters(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
};

CompressResult finish_compression(const DiscreteMeasure& mu, Clusters& clusters,
                                  const std::vector<double>& loc, const std::vector<double>& w,
                                  const std::vector<std::size_t>& survivors, double p) {
  const std::size_t dim = mu.dim();
  double cost = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const std::size_t root = clusters.find(i);
    const std::span<const double> b(loc.data() + root * dim, dim);
    cost += mu.weight(i) * std::pow(euclidean_distance(mu.location(i), b), p);
  }
  std::vector<double> coords;
  std::vector<double> weights;
  coords.reserve(survivors.size() * dim);
  for (std::size_t s : survivors) {
    coords.insert(coords.end(), loc.begin() + static_cast<std::ptrdiff_t>(s * dim),
                  loc.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim));
    weights.push_back(w[s]);
  }
  return {DiscreteMeasure::from_flat(dim, std::move(coords), std::move(weights)),
          std::pow(cost, 1.0 / p)};
}

// In one dimension the closest pair is always adjacent in sorted order and a
// barycentric merge keeps that order, so a heap over neighbor gaps suffices.
CompressResult compress_1d(const DiscreteMeasure& mu, std::size_t max_support, double p) {
  const std::size_t n = mu.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return mu.location(a)[0] < mu.location(b)[0]; });

  std::vector<double> loc(mu.coords().begin(), mu.coords().end());
  std::vector<double> w(mu.weights().begin(), mu.weights().end());
  // Linked list over sorted ranks.
  std::vector<std::size_t> left(n), right(n);
  std::vector<unsigned> stamp(n, 0);
  std::vector<bool> alive(n, true);
  const std::size_t none = n;
  for (std::size_t r = 0; r < n; ++r) {
    left[r] = r == 0 ? none : r - 1;
    right[r] = r + 1 == n ? none : r + 1;
  }
  auto x = [&](std::size_t rank) { return loc[order[rank]]; };

  using Entry = std::tuple<double, std::size_t, unsigned, unsigned>;  // gap, left rank, stamps
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  auto push = [&](std::size_t r) {
    const std::size_t q = right[r];
    if (q == none) return;
    heap.emplace(x(q) - x(r), r, stamp[r], stamp[q]);
  };
  for (std::size_t r = 0; r + 1 < n; ++r) push(r);

  Clusters clusters(n);
  std::size_t count = n;
  while (count > max_support && !heap.empty()) {
    const auto [gap, r, sr, sq] = heap.top();
    heap.pop();
    const std::size_t q = right[r];
    if (!alive[r] || q == none || stamp[r] != sr || stamp[q] != sq) continue;
    const std::size_t a = order[r];
    const std::size_t b = order[q];
    const double wa = w[a];
    const double wb = w[b];
    loc[a] = (wa * loc[a] + wb * loc[b]) / (wa + wb);
    w[a] = wa + wb;
    clusters.parent[b] = a;
    alive[q] = false;
    right[r] = right[q];
    if (right[q] != none) left[right[q]] = r;
    ++stamp[r];
    if (left[r] != none) push(left[r]);
    push(r);
    --count;
  }

  std::vector<std::size_t> survivors;
  for (std::size_t r = 0; r < n; ++r) {
    if (alive[r]) survivors.push_back(order[r]);
  }
  return finish_compression(mu, clusters, loc, w, survivors, p);
}

CompressResult compress_nd(const DiscreteMeasure& mu, std::size_t max_support, double p) {
  const std::size_t n = mu.size();
  const std::size_t dim = mu.dim();
  std::vector<double> loc(mu.coords().begin(), mu.coords().end());
  std::vector<double> w(mu.weights().begin(), mu.weights().end());
  std::vector<bool> alive(n, true);
  auto at = [&](std::size_t i) { return std::span<const double>(loc.data() + i * dim, dim); };

  // nearest[i]: lowest-index nearest live neighbor of i.
  std::vector<std::size_t> nearest(n, n);
  std::vector<double> nearest_d2(n, INFINITY);
  auto refresh = [&](std::size_t i) {
    nearest[i] = n;
    nearest_d2[i] = INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      const double d2 = squared_distance(at(i), at(j));
      if (d2 < nearest_d2[i]) {
        nearest_d2[i] = d2;
        nearest[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  Clusters clusters(n);
  std::size_t count = n;
  while (count > max_support) {
    std::size_t bi = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i] || nearest[i] == n) continue;
      if (bi == n) {
        bi = i;
        continue;
      }
      const auto key = [&](std::size_t k) {
        return std::tuple(nearest_d2[k], std::min(k, nearest[k]), std::max(k, nearest[k]));
      };
      if (key(i) < key(bi)) bi = i;
    }
    const std::size_t a = std::min(bi, nearest[bi]);
    const std::size_t b = std::max(bi, nearest[bi]);
    const double wa = w[a];
    const double wb = w[b];
    for (std::size_t k = 0; k < dim; ++k) {
      loc[a * dim + k] = (wa * loc[a * dim + k] + wb * loc[b * dim + k]) / (wa + wb);
    }
    w[a] = wa + wb;
    alive[b] = false;
    clusters.parent[b] = a;
    --count;
    refresh(a);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == a) continue;
      if (nearest[k] == a || nearest[k] == b) {
        refresh(k);
        continue;
      }
      const double d2 = squared_distance(at(k), at(a));
      if (d2 < nearest_d2[k] || (d2 == nearest_d2[k] && a < nearest[k])) {
        nearest_d2[k] = d2;
        nearest[k] = a;
      }
    }
  }

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) survivors.push_back(i);
  }
  return finish_compression(mu, clusters, loc, w, survivors, p);
}

}  // namespace

CompressResult compress(const DiscreteMeasure& mu, std::size_t max_support, double p) {
  require_order(p);
  if (max_support < 1) throw ValidationError("compress: max_support must be >= 1");
  if (mu.size() <= max_support) return {mu, 0.0};
  return mu.dim() == 1 ? compress_1d(mu, max_support, p) : compress_nd(mu, max_support, p);
}

double distance_to_set(std::span<const double> x, std::span<const Point> anchors) {
  if (anchors.empty()) throw ValidationError("anchor set must be nonempty");
  double best = INFINITY;
  for (const Point& a : anchors) {
    if (a.dim() != x.size()) throw DimensionError("anchor dimension mismatch");
    best = std::min(best, euclidean_distance(x, a.coords()));
  }
  return best;
}

double tail_mass(const DiscreteMeasure& mu, std::span<const Point> anchors, double R) {
  double mass = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (distance_to_set(mu.location(i), anchors) > R) mass += mu.weight(i);
  }
  return mass;
}

DiscreteMeasure parse_measure(std::istream& in) {
  std::vector<double> coords;
  std::vector<double> weights;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<double> values;
    std::string token;
    while (fields >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') {
        throw ValidationError("line " + std::to_string(lineno) + ": not a number: '" + token + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) continue;
    if (values.size() < 2) {
      throw ValidationError("line " + std::to_string(lineno) + ": expected `weight x1 [... xd]`");
    }
    if (dim == 0) dim = values.size() - 1;
    if (values.size() - 1 != dim) {
      throw DimensionError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                           " coordinates");
    }
    weights.push_back(values[0]);
    coords.insert(coords.end(), values.begin() + 1, values.end());
  }
  if (weights.empty()) throw ConstructionError("measure file contains no atoms");
  return DiscreteMeasure::from_flat(dim, std::move(coords), std::move(weights));
}

DiscreteMeasure parse_measure_text(const std::string& text) {
  std::istringstream in(text);
  return parse_measure(in);
}

DiscreteMeasure load_measure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open measure file '" + path + "'");
  return parse_measure(in);
}

void write_measure(std::ostream& out, const DiscreteMeasure& mu) {
  char buf[64];
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", mu.weight(i));
    out << buf;
    for (double c : mu.location(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", c);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

void save_measure(const std::string& path, const DiscreteMeasure& mu) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write measure file '" + path + "'");
  write_measure(out, mu);
}

}  // namespace wassdyn
