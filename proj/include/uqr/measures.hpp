#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uqr/dynamics.hpp"
#include "uqr/geometry.hpp"
#include "uqr/rng.hpp"

namespace uqr::measures {

using dynamics::MapHandle;
using geometry::ManifoldId;
using geometry::Point;

/// Weighted point cloud approximating a finite Borel measure.
/// Coordinates are stored flat (atom-major) to keep 10^7-atom clouds compact.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(const ManifoldId& m) : manifold_(m) {}

  static EmpiricalMeasure dirac(const Point& x, double weight = 1.0);
  /// n i.i.d. uniform atoms of weight 1/n.
  static EmpiricalMeasure uniform_cloud(const ManifoldId& m, std::size_t n, const SeedStream& rng);
  /// Torus only: the res^n grid points i/res, weight res^{-n}.
  static EmpiricalMeasure uniform_grid(const ManifoldId& m, int res);

  const ManifoldId& manifold() const { return manifold_; }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }

  Point atom(std::size_t i) const;
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> raw_coords(std::size_t i) const;

  void add(const Point& x, double w);
  void reserve(std::size_t n);
  /// Sum of weights (pairwise reduction).
  double total() const;

  /// Throws DomainError unless total is within tol of 1.
  void require_probability(double tol = 1e-9) const;

  /// CSV: header "c0,...,w" then one atom per row, 17 significant digits.
  void write_csv(std::ostream& os) const;
  static EmpiricalMeasure read_csv(const ManifoldId& m, std::istream& is);

  // Bulk construction used by balanced_iterate.
  std::vector<double>& mutable_coords() { return coords_; }
  std::vector<double>& mutable_weights() { return weights_; }

 private:
  ManifoldId manifold_;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

// =============================================================================
// Test functions
// =============================================================================

struct TestFunction {
  std::function<double(const Point&)> fn;
  double sup_abs = 1.0;
  std::string label;

  double operator()(const Point& x) const { return fn(x); }
};

TestFunction constant_function(double c);

/// A finite family of bounded test functions evaluated together. Batch
/// evaluation lets Fourier modes share one sincos per axis.
class TestFamily {
 public:
  using BatchFn = std::function<void(const Point&, std::span<double>)>;
  /// Adds w * eta_j(x) into sum[j]; optional fast path for integration.
  using AccumFn = std::function<void(const Point&, double, std::span<double>)>;

  TestFamily(BatchFn batch, std::vector<double> sup_abs, std::vector<std::string> labels, AccumFn accumulate = {});
  static TestFamily from_functions(std::vector<TestFunction> fns);

  std::size_t size() const { return sup_.size(); }
  void evaluate(const Point& x, std::span<double> out) const { batch_(x, out); }
  void accumulate(const Point& x, double w, std::span<double> sum) const;
  double sup_abs(std::size_t i) const { return sup_[i]; }
  const std::string& label(std::size_t i) const { return labels_[i]; }

 private:
  BatchFn batch_;
  AccumFn accum_;
  std::vector<double> sup_;
  std::vector<std::string> labels_;
};

/// Torus: cos/sin(2 pi p.x) for nonzero p in [-cutoff, cutoff]^n (one of each
/// +-p pair), plus indicators of the 4^n dyadic boxes of side 1/4.
TestFamily torus_test_family(const ManifoldId& m, int cutoff = 3);
/// Sphere: indicators of chordal caps at Fibonacci-spaced centers.
TestFamily sphere_test_family(int centers = 20, double chordal_radius = 0.5);
TestFamily default_test_family(const ManifoldId& m);

std::vector<Point> fibonacci_sphere(int count);

/// sin and cos of 2 pi x, accurate to about one ulp.
void sincos_turns(double x, double& s, double& c);

// =============================================================================
// Regions
// =============================================================================

/// Half-open box [lo, hi) in torus coordinates.
struct TorusBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Closed-open chordal cap {x : |x - center| < radius} on the sphere.
struct SphereCap {
  Point center;
  double chordal_radius = 0.0;
};

using Region = std::variant<TorusBox, SphereCap>;

bool contains(const Region& r, const Point& x);

/// Chordal distance from x to the equator {z = 0}.
double chordal_distance_to_equator(const Point& x);

// =============================================================================
// Operations
// =============================================================================

/// (f_* eta)(x) = sum over preimages z of i(z, f) eta(z).
double pushforward_eval(const MapHandle& f, const TestFunction& eta, const Point& x);

/// Atom-level pull-back: (x, w) -> {(z, w i(z,f))}; total multiplies by deg f.
EmpiricalMeasure pullback(const MapHandle& f, const EmpiricalMeasure& mu);

struct BalancedOptions {
  std::size_t atom_cap = 10'000'000;
};

/// (deg f^k)^{-1} (f^k)^* of an m-sample uniform cloud: every base sample is
/// expanded into its depth-k preimage tree, leaf weight = product of local
/// indices along the branch / (m deg^k). k = 0 returns the raw cloud.
EmpiricalMeasure balanced_iterate(const MapHandle& f, int k, std::size_t m, const SeedStream& rng,
                                  const BalancedOptions& opts = {});

double integrate(const EmpiricalMeasure& mu, const TestFunction& eta);
double box_mass(const EmpiricalMeasure& mu, const Region& region);
/// Masses of the side^n boxes [i/side, (i+1)/side) in one pass (torus only);
/// box index sum_a i_a side^a.
std::vector<double> grid_box_masses(const EmpiricalMeasure& mu, int side);

/// Mass of atoms within chordal distance r of the equator (sphere only).
double equator_band_mass(const EmpiricalMeasure& mu, double chordal_r);
/// Mass within chordal radius r of either pole (sphere only).
double pole_cap_mass(const EmpiricalMeasure& mu, double chordal_r);

struct ResidualReport {
  double residual = 0.0;         // max over the family
  std::size_t worst = 0;         // index of the maximizing test function
  std::vector<double> per_test;  // normalized residual per test function
};

/// max over eta of |int f_* eta dmu - deg f int eta dmu| / (deg f sup|eta|).
ResidualReport balancedness_residual(const MapHandle& f, const EmpiricalMeasure& mu,
                                     const TestFamily& family);

}  // namespace uqr::measures
