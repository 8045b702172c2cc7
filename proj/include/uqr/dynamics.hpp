#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "uqr/geometry.hpp"
#include "uqr/rng.hpp"

namespace uqr::dynamics {

using geometry::ManifoldId;
using geometry::Point;
using geometry::ProductPoint;

// Small fixed-capacity matrices; no heap traffic in sampling loops.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                             geometry::kMaxTorusDim, geometry::kMaxTorusDim>;
using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                                geometry::kMaxTorusDim, geometry::kMaxTorusDim>;

struct Preimage {
  Point point;
  int index = 1;  // local index i(z, f)
};

/// Operator (spectral) norm.
double operator_norm(const Matrix& m);
/// Smallest singular value.
double min_singular_value(const Matrix& m);
/// Exact integer determinant (n <= 4).
long long integer_determinant(const IntMatrix& a);

// =============================================================================
// Toral endomorphisms x -> A x mod 1
// =============================================================================

class ToralEndo {
 public:
  explicit ToralEndo(IntMatrix a);

  const ManifoldId& manifold() const { return manifold_; }
  const IntMatrix& matrix() const { return a_; }
  int degree() const { return degree_; }

  Point eval(const Point& x) const;
  Matrix differential(const Point&) const { return a_real_; }
  void preimages_into(const Point& y, std::vector<Preimage>& out) const;
  int local_index(const Point&) const { return 1; }
  std::vector<Point> branch_points() const { return {}; }
  /// K(A^k) = ||A^k||^n / |det A|^k, exact for linear maps.
  double distortion_bound(int k) const;

  /// Integer representatives v of Z^n / A Z^n with A^{-1} v in [0,1)^n.
  const std::vector<std::array<long long, geometry::kMaxTorusDim>>& coset_representatives() const {
    return cosets_;
  }

 private:
  IntMatrix a_;
  Matrix a_real_;
  Matrix a_inv_;
  ManifoldId manifold_;
  int degree_ = 0;
  std::vector<std::array<long long, geometry::kMaxTorusDim>> cosets_;
  std::vector<std::array<double, geometry::kMaxTorusDim>> offsets_;  // A^{-1} v
};

// =============================================================================
// Power maps w -> w^d on the Riemann sphere
// =============================================================================

/// Stereographic chart value. The north chart w = (x + iy)/(1 + z) sends the
/// north pole to 0; the south chart u = (x - iy)/(1 - z) = 1/w sends the south
/// pole to 0. Points are always represented in the chart with |value| <= 1.
struct ChartValue {
  std::complex<double> value;
  bool south = false;
};

ChartValue to_chart(const Point& p);
Point from_chart(const ChartValue& c);
/// Point with north-chart value w (w may be any complex number; infinity not allowed).
Point sphere_from_w(std::complex<double> w);

class SpherePowerMap {
 public:
  explicit SpherePowerMap(int d);

  const ManifoldId& manifold() const { return manifold_; }
  int exponent() const { return d_; }
  int degree() const { return d_; }

  Point eval(const Point& x) const;
  /// Derivative in orthonormal frames induced by the active chart at x and
  /// f(x) (both sides use the same chart). Includes the conformal factors.
  Matrix differential(const Point& x) const;
  void preimages_into(const Point& y, std::vector<Preimage>& out) const;
  int local_index(const Point& x) const;
  std::vector<Point> branch_points() const;
  double distortion_bound(int) const { return 1.0; }

 private:
  int d_;
  ManifoldId manifold_ = ManifoldId::sphere2();
};

// =============================================================================
// Conjugated endomorphisms h o A o h^{-1}
// =============================================================================

enum class ShearProfile { sine, bump };

std::string to_string(ShearProfile p);
ShearProfile shear_profile_from_string(const std::string& s);

/// f = h o base o h^{-1} with h(x) = (x_1 + s psi(x_2), x_2, ..., x_n).
/// Both profiles have sup |psi'| = 1, so s < 1 keeps h a diffeomorphism.
class ShearedEndo {
 public:
  ShearedEndo(ToralEndo base, double shear, ShearProfile profile);

  const ManifoldId& manifold() const { return base_.manifold(); }
  const ToralEndo& base() const { return base_; }
  double shear() const { return shear_; }
  ShearProfile profile() const { return profile_; }
  int degree() const { return base_.degree(); }

  Point conjugacy(const Point& x) const;          // h
  Point conjugacy_inverse(const Point& y) const;  // h^{-1}
  Matrix conjugacy_differential(const Point& x) const;

  Point eval(const Point& x) const;
  Matrix differential(const Point& x) const;
  void preimages_into(const Point& y, std::vector<Preimage>& out) const;
  int local_index(const Point&) const { return 1; }
  std::vector<Point> branch_points() const { return {}; }
  /// Outer distortion of h (and of h^{-1}): ||Dh||^n with det Dh = 1.
  double conjugacy_distortion() const;
  /// Analytic bound K(f^k) <= K_h^2 K(A^k).
  double distortion_bound(int k) const;

 private:
  double psi(double t) const;
  double dpsi(double t) const;

  ToralEndo base_;
  double shear_;
  ShearProfile profile_;
};

// =============================================================================
// Uniform handle
// =============================================================================

class MapHandle {
 public:
  using Family = std::variant<ToralEndo, SpherePowerMap, ShearedEndo>;

  MapHandle(ToralEndo f);
  MapHandle(SpherePowerMap f);
  MapHandle(ShearedEndo f);

  static MapHandle identity(int n);

  const Family& family() const { return *impl_; }
  /// "toral", "sphere_power" or "sheared".
  std::string family_name() const;
  std::string describe() const;

  const ManifoldId& manifold() const;
  int degree() const;

  Point eval(const Point& x) const;
  Matrix differential(const Point& x) const;
  /// J_f(x) = |det Df(x)| in orthonormal frames.
  double jacobian(const Point& x) const;
  /// ||Df||^n / J_f; empty at branch points where J_f vanishes.
  std::optional<double> pointwise_distortion(const Point& x) const;

  std::vector<Preimage> preimages(const Point& y) const;
  void preimages_into(const Point& y, std::vector<Preimage>& out) const;
  int local_index(const Point& x) const;
  std::vector<Point> branch_points() const;
  /// Analytic upper bound for K(f^k).
  double distortion_bound(int k) const;

 private:
  std::shared_ptr<const Family> impl_;
};

/// (x, f x, ..., f^k x).
ProductPoint chain_point(const MapHandle& f, const Point& x, int k);

/// D(f^j)(x) for j = 0..k by the chain rule (entry 0 is the identity).
std::vector<Matrix> orbit_differentials(const MapHandle& f, const Point& x, int k);

struct DistortionEstimate {
  double value = 1.0;  // sup of sampled pointwise distortion of f^k
  int k = 1;
  int samples = 0;
  int resampled = 0;  // samples that landed on the branch set
};

/// Sampled lower estimate of K(f^k).
DistortionEstimate iterate_distortion(const MapHandle& f, int k, int samples, const SeedStream& rng);

}  // namespace uqr::dynamics
