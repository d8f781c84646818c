#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wassdyn {

inline constexpr double kMergeTolerance = 1e-12;
inline constexpr double kWeightSumTolerance = 1e-12;

/// A point of R^d. Coordinates are always finite.
class Point {
 public:
  Point() = default;
  explicit Point(std::vector<double> coords);
  Point(std::initializer_list<double> coords);
  explicit Point(std::span<const double> coords);

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::vector<double> coords_;
};

struct Atom {
  Point location;
  double weight = 0.0;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Finitely supported probability measure on R^d.
///
/// Every instance satisfies: weights strictly positive and summing to one
/// within kWeightSumTolerance, no two atoms closer than kMergeTolerance, and
/// a common dimension for all locations. Atoms are stored in a flat buffer;
/// `location(i)` is a view into it.
class DiscreteMeasure {
 public:
  /// Validates, drops zero weights, merges near-duplicate locations and
  /// renormalizes. Throws ValidationError, DimensionError or ConstructionError.
  static DiscreteMeasure from_atoms(std::span<const Atom> atoms);
  static DiscreteMeasure from_atoms(std::initializer_list<Atom> atoms);

  /// Same normalization as from_atoms over a flat coordinate buffer
  /// (`coords.size() == dim * weights.size()`).
  static DiscreteMeasure from_flat(std::size_t dim, std::vector<double> coords,
                                   std::vector<double> weights);

  static DiscreteMeasure dirac(const Point& x);

  /// Equal weights on the given points.
  static DiscreteMeasure uniform(std::span<const Point> points);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }

  std::span<const double> location(std::size_t i) const {
    return std::span<const double>(coords_).subspan(i * dim_, dim_);
  }
  Point point(std::size_t i) const { return Point(location(i)); }
  double weight(std::size_t i) const { return weights_[i]; }

  std::span<const double> weights() const { return weights_; }
  std::span<const double> coords() const { return coords_; }

  std::vector<Atom> atoms() const;

 private:
  DiscreteMeasure(std::size_t dim, std::vector<double> coords, std::vector<double> weights)
      : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {}

  std::size_t dim_ = 1;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

/// new_measure: validated construction from (location, weight) pairs.
inline DiscreteMeasure new_measure(std::span<const Atom> atoms) {
  return DiscreteMeasure::from_atoms(atoms);
}

/// Sum_i w_i |x_i - x0|^p, the p-th power of the distance to the Dirac at x0.
double moment_p(const DiscreteMeasure& mu, const Point& x0, double p);

/// Convex combination t * first + (1 - t) * second.
DiscreteMeasure mix(const DiscreteMeasure& first, const DiscreteMeasure& second, double t);

struct CompressResult {
  DiscreteMeasure measure;
  /// Cost of the coupling that sends every input atom to the barycenter it
  /// was merged into, raised to 1/p. Upper bound on w_p(input, output).
  double bound = 0.0;
};

/// Greedy closest-pair barycentric merging until at most `max_support`
/// atoms remain. Ties are broken toward the lowest atom index.
CompressResult compress(const DiscreteMeasure& mu, std::size_t max_support, double p = 1.0);

/// Euclidean distance from x to the nearest anchor.
double distance_to_set(std::span<const double> x, std::span<const Point> anchors);

/// Mass of atoms whose distance to the anchor set exceeds R.
double tail_mass(const DiscreteMeasure& mu, std::span<const Point> anchors, double R);

// Text format: one atom per line, `weight x1 [x2 ... xd]`, `#` starts a comment.
DiscreteMeasure parse_measure(std::istream& in);
DiscreteMeasure parse_measure_text(const std::string& text);
DiscreteMeasure load_measure(const std::string& path);
void write_measure(std::ostream& out, const DiscreteMeasure& mu);
void save_measure(const std::string& path, const DiscreteMeasure& mu);

}  // namespace wassdyn
