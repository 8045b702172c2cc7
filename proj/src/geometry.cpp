#include "uqr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uqr/errors.hpp"

namespace uqr::geometry {

ManifoldId ManifoldId::torus(int n) {
  if (n < 2 || n > kMaxTorusDim) {
    throw DomainError("torus dimension must lie in [2, " + std::to_string(kMaxTorusDim) + "]");
  }
  return {Kind::torus, n};
}

std::string ManifoldId::name() const {
  return is_torus() ? "torus" + std::to_string(dim) : "sphere2";
}

double manifold_volume(const ManifoldId& m) { return m.is_torus() ? 1.0 : 4.0 * std::numbers::pi; }

double manifold_diameter(const ManifoldId& m) {
  return m.is_torus() ? 0.5 * std::sqrt(static_cast<double>(m.dim)) : std::numbers::pi;
}

double injectivity_radius(const ManifoldId& m) { return m.is_torus() ? 0.5 : std::numbers::pi; }

double ball_volume(const ManifoldId& m, double r) {
  if (m.is_sphere()) return 2.0 * std::numbers::pi * (1.0 - std::cos(r));
  const double n = m.dim;
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0) * std::pow(r, n);
}

Point::Point(const ManifoldId& m, std::span<const double> coords) : manifold_(m) {
  if (static_cast<int>(coords.size()) != m.ambient_dim()) {
    throw DomainError("point on " + m.name() + " needs " + std::to_string(m.ambient_dim()) +
                      " coordinates");
  }
  if (m.is_torus()) {
    for (int i = 0; i < m.dim; ++i) c_[i] = wrap01(coords[i]);
    return;
  }
  const double norm = std::hypot(coords[0], coords[1], coords[2]);
  if (!(norm > 0.0)) throw DomainError("sphere point must be a nonzero vector");
  for (int i = 0; i < 3; ++i) c_[i] = coords[i] / norm;
}

Point Point::canonical(const ManifoldId& m, std::span<const double> coords) {
  Point p;
  p.manifold_ = m;
  std::copy(coords.begin(), coords.end(), p.c_.begin());
  return p;
}

Point Point::torus(std::initializer_list<double> coords) {
  return Point(ManifoldId::torus(static_cast<int>(coords.size())), coords);
}

Point Point::sphere(double x, double y, double z) { return Point(ManifoldId::sphere2(), {x, y, z}); }

bool operator==(const Point& a, const Point& b) {
  if (!(a.manifold_ == b.manifold_)) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a.c_[i] != b.c_[i]) return false;
  }
  return true;
}

ProductPoint::ProductPoint(std::vector<Point> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DomainError("product point needs at least one entry");
  for (const Point& p : entries_) {
    if (!(p.manifold() == entries_.front().manifold())) {
      throw DomainError("product point entries must share one manifold");
    }
  }
}

double dist_raw(const ManifoldId& m, const double* a, const double* b) {
  if (m.is_torus()) {
    // Coordinates lie in [0,1), so the optimal lattice shift per axis is in
    // {-1,0,1}; the Euclidean norm separates over axes.
    double s = 0.0;
    for (int i = 0; i < m.dim; ++i) {
      double d = std::abs(a[i] - b[i]);
      d = std::min(d, 1.0 - d);
      s += d * d;
    }
    return std::sqrt(s);
  }
  const double cx = a[1] * b[2] - a[2] * b[1];
  const double cy = a[2] * b[0] - a[0] * b[2];
  const double cz = a[0] * b[1] - a[1] * b[0];
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::atan2(std::hypot(cx, cy, cz), dot);
}

double dist(const Point& a, const Point& b) {
  if (!(a.manifold() == b.manifold())) throw DomainError("dist: points on different manifolds");
  return dist_raw(a.manifold(), a.coords().data(), b.coords().data());
}

namespace {
void check_pair(const ProductPoint& x, const ProductPoint& y) {
  if (x.size() != y.size()) throw DomainError("product points have different lengths");
  if (!(x.manifold() == y.manifold())) throw DomainError("product points on different manifolds");
}
}  // namespace

double sup_dist(const ProductPoint& x, const ProductPoint& y) {
  check_pair(x, y);
  double best = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) best = std::max(best, dist(x[j], y[j]));
  return best;
}

double product_dist(const ProductPoint& x, const ProductPoint& y) {
  check_pair(x, y);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = dist(x[j], y[j]);
    s += d * d;
  }
  return std::sqrt(s);
}

std::string to_string(ChainMetric m) { return m == ChainMetric::sup ? "sup" : "product"; }

Point sample_uniform(const ManifoldId& m, SeedStream& rng) {
  std::array<double, kMaxAmbient> c{};
  if (m.is_torus()) {
    for (int i = 0; i < m.dim; ++i) c[i] = rng.uniform();
    return Point(m, std::span<const double>(c.data(), m.dim));
  }
  for (;;) {
    for (int i = 0; i < 3; ++i) c[i] = rng.normal();
    if (std::hypot(c[0], c[1], c[2]) > 1e-12) break;
  }
  return Point(m, std::span<const double>(c.data(), 3));
}

Point sample_ball(const Point& center, double r, SeedStream& rng) {
  const ManifoldId& m = center.manifold();
  if (r > injectivity_radius(m)) throw DomainError("sample_ball: radius above injectivity radius");
  if (m.is_torus()) {
    std::array<double, kMaxAmbient> dir{};
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int i = 0; i < m.dim; ++i) {
        dir[i] = rng.normal();
        norm += dir[i] * dir[i];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    const double rho = r * std::pow(rng.uniform(), 1.0 / m.dim);
    std::array<double, kMaxAmbient> c{};
    for (int i = 0; i < m.dim; ++i) c[i] = center[i] + rho * dir[i] / norm;
    return Point(m, std::span<const double>(c.data(), m.dim));
  }
  // Cap around the center: cos(angle) uniform in [cos r, 1].
  const double cz = 1.0 - rng.uniform() * (1.0 - std::cos(r));
  const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double c0 = center[0], c1 = center[1], c2 = center[2];
  // Orthonormal frame (e1, e2) of the tangent plane at the center.
  double e1[3];
  if (std::abs(c2) < 0.9) {
    e1[0] = -c1; e1[1] = c0; e1[2] = 0.0;
  } else {
    e1[0] = 0.0; e1[1] = -c2; e1[2] = c1;
  }
  const double n1 = std::hypot(e1[0], e1[1], e1[2]);
  for (double& v : e1) v /= n1;
  const double e2[3] = {c1 * e1[2] - c2 * e1[1], c2 * e1[0] - c0 * e1[2], c0 * e1[1] - c1 * e1[0]};
  const double a = sz * std::cos(phi), b = sz * std::sin(phi);
  return Point::sphere(cz * c0 + a * e1[0] + b * e2[0], cz * c1 + a * e1[1] + b * e2[1],
                       cz * c2 + a * e1[2] + b * e2[2]);
}

Point translate(const Point& x, std::span<const double> t) {
  if (!x.manifold().is_torus()) throw DomainError("translate: only defined on the torus");
  if (static_cast<int>(t.size()) != x.size()) throw DomainError("translate: dimension mismatch");
  std::array<double, kMaxAmbient> c{};
  for (int i = 0; i < x.size(); ++i) c[i] = x[i] + t[i];
  return Point(x.manifold(), std::span<const double>(c.data(), t.size()));
}

}  // namespace uqr::geometry
