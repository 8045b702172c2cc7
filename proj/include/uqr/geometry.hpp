#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "uqr/rng.hpp"

namespace uqr::geometry {

inline constexpr int kMaxTorusDim = 4;
inline constexpr int kMaxAmbient = 4;

// =============================================================================
// Model manifolds
// =============================================================================

/// Flat torus T^n = R^n / Z^n (unit volume) or the round unit 2-sphere.
struct ManifoldId {
  enum class Kind : std::uint8_t { torus, sphere2 };

  Kind kind = Kind::torus;
  int dim = 2;

  static ManifoldId torus(int n);
  static ManifoldId sphere2() { return {Kind::sphere2, 2}; }

  bool is_torus() const { return kind == Kind::torus; }
  bool is_sphere() const { return kind == Kind::sphere2; }
  /// Intrinsic dimension n.
  int dimension() const { return dim; }
  /// Number of stored coordinates (n for the torus, 3 for the sphere).
  int ambient_dim() const { return is_torus() ? dim : 3; }

  std::string name() const;

  friend bool operator==(const ManifoldId&, const ManifoldId&) = default;
};

/// Riemannian volume: 1 for the torus, 4*pi for the unit sphere.
double manifold_volume(const ManifoldId& m);
/// Riemannian diameter: sqrt(n)/2 for the torus, pi for the sphere.
double manifold_diameter(const ManifoldId& m);
/// Volume of the geodesic ball of radius r (for r below the injectivity radius).
double ball_volume(const ManifoldId& m, double r);
/// Injectivity radius: 1/2 for the unit torus, pi for the sphere.
double injectivity_radius(const ManifoldId& m);

// =============================================================================
// Points
// =============================================================================

/// A location on a model manifold. Torus coordinates are reduced into [0,1)
/// on construction; sphere points are stored as unit vectors in R^3.
class Point {
 public:
  Point() = default;
  Point(const ManifoldId& m, std::span<const double> coords);
  Point(const ManifoldId& m, std::initializer_list<double> coords)
      : Point(m, std::span<const double>(coords.begin(), coords.size())) {}

  static Point torus(std::initializer_list<double> coords);
  /// Skips validation; coords must already be canonical (wrapped or unit length).
  static Point canonical(const ManifoldId& m, std::span<const double> coords);
  static Point sphere(double x, double y, double z);

  const ManifoldId& manifold() const { return manifold_; }
  int size() const { return manifold_.ambient_dim(); }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  std::span<const double> coords() const { return {c_.data(), static_cast<std::size_t>(size())}; }

  friend bool operator==(const Point& a, const Point& b);

 private:
  ManifoldId manifold_;
  std::array<double, kMaxAmbient> c_{};
};

/// Reduces t into [0, 1); never returns 1.0.
inline double wrap01(double t) {
  // Integer truncation is an exact floor below 2^52 and avoids a libm call.
  double fl;
  if (std::abs(t) < 4.0e15) {
    fl = static_cast<double>(static_cast<long long>(t));
    if (fl > t) fl -= 1.0;
  } else {
    fl = std::floor(t);
  }
  const double r = t - fl;
  return r >= 1.0 ? 0.0 : r;
}

/// A (k+1)-tuple of points on a common manifold: an element of M^{k+1}.
class ProductPoint {
 public:
  ProductPoint() = default;
  explicit ProductPoint(std::vector<Point> entries);

  int k() const { return static_cast<int>(entries_.size()) - 1; }
  std::size_t size() const { return entries_.size(); }
  const Point& operator[](std::size_t j) const { return entries_[j]; }
  const std::vector<Point>& entries() const { return entries_; }
  const ManifoldId& manifold() const { return entries_.front().manifold(); }

 private:
  std::vector<Point> entries_;
};

// =============================================================================
// Metrics
// =============================================================================

/// Riemannian distance. Throws DomainError on mismatched manifolds.
double dist(const Point& a, const Point& b);
/// Same distance on raw coordinate arrays (no checks).
double dist_raw(const ManifoldId& m, const double* a, const double* b);

/// d_{k,inf}: maximum of coordinate-wise distances.
double sup_dist(const ProductPoint& x, const ProductPoint& y);
/// Distance induced by the product Riemannian metric on M^{k+1}.
double product_dist(const ProductPoint& x, const ProductPoint& y);

/// Metric on M^{k+1}: sup-metric d_{k,inf} or the product Riemannian metric.
enum class ChainMetric { sup, product };

std::string to_string(ChainMetric m);

/// Uniform (normalized volume) sample.
Point sample_uniform(const ManifoldId& m, SeedStream& rng);

/// Uniform sample from the geodesic ball B(center, r); r must not exceed the
/// injectivity radius.
Point sample_ball(const Point& center, double r, SeedStream& rng);

/// Translation x + t on the torus.
Point translate(const Point& x, std::span<const double> t);

}  // namespace uqr::geometry
