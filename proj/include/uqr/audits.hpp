#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uqr/dynamics.hpp"
#include "uqr/entropy_top.hpp"
#include "uqr/report.hpp"
#include "uqr/rng.hpp"

namespace uqr::audits {

using dynamics::MapHandle;

// =============================================================================
// Bihari-LaSalle
// =============================================================================

/// Checks g(t) >= C int_0^t g^{(n-1)/n} => g(t) >= (C/n)^n t^n on the uniform
/// grid t_i = i a / (N - 1). The integral is the cumulative trapezoid rule and
/// the hypothesis is allowed its quadrature error C t h^2 max|phi''| / 12.
/// A grid point counts as hypothesis-holding when the hypothesis holds at it
/// and at every earlier grid point (the lemma needs it on all of [0, t]).
/// Throws DomainError if g(0) < 0 or g(t_i) <= 0 for some i > 0.
AuditReport bihari_check(std::span<const double> g, double a, double C, int n);

/// Random instance satisfying the discrete hypothesis exactly: each g_i solves
/// g_i = C * trapezoid_i(g) + noise_i with nonnegative noise.
struct BihariInstance {
  std::vector<double> g;
  double a = 1.0;
  double C = 1.0;
  int n = 2;
};
BihariInstance bihari_generate(int n, std::size_t points, SeedStream& rng);

struct BihariSelftest {
  std::size_t instances = 0;
  std::size_t failures = 0;
  std::size_t checked_points = 0;
  std::vector<AuditReport> reports;
};
/// `instances` generated instances per n in {2, 3}.
BihariSelftest bihari_selftest(std::size_t instances, std::uint64_t seed, std::size_t points = 200);

// =============================================================================
// Entropy audits
// =============================================================================

struct EntropyConfig {
  std::vector<double> eps_schedule{0.2, 0.1, 0.05};
  std::vector<int> k_range{1, 2, 3, 4, 5, 6};
  entropy::BaseSource base = entropy::GridSource{512};
  std::vector<int> distortion_ks{1, 2, 3, 4, 5, 6};
  int distortion_samples = 2000;
  double tolerance = 0.1;
  std::uint64_t seed = 1;
};

/// Default base source for a manifold: 512^2 grid on T^2, 64^3 on T^3,
/// 3e5 random samples on the sphere.
entropy::BaseSource default_base(const geometry::ManifoldId& m, std::uint64_t seed);

/// h(f) <= log deg f + n * limsup log K(f^k) / k, with the slope of the sampled
/// log K(f^k) (floored at 0) standing in for the limsup.
AuditReport audit_theorem_7_1(const MapHandle& f, const EntropyConfig& config,
                              const entropy::EntropyEstimate* precomputed = nullptr);

struct MainConfig {
  EntropyConfig entropy;
  /// |h_est - log deg| tolerance; unset: 0.15 for conformal linear parts, 0.2 otherwise.
  std::optional<double> entropy_tolerance;
  int balanced_k = 3;
  std::size_t balanced_samples = 1000;
  int ks_depth = 4;
  int ks_k = 4;
  std::size_t ks_atoms = 1'000'000;
  double ks_tolerance = 0.1;
};

/// Torus maps: entropy estimate near log deg f, exact measure lower bound, KS
/// estimate near log deg f and the distortion upper-bound audit. Sphere maps get the
/// upper-bound verdict only.
AuditReport audit_main_theorem(const MapHandle& f, const MainConfig& config,
                               const entropy::EntropyEstimate* precomputed = nullptr);

}  // namespace uqr::audits
