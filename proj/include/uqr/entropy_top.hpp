#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "uqr/dynamics.hpp"
#include "uqr/geometry.hpp"
#include "uqr/graph_geometry.hpp"
#include "uqr/report.hpp"

namespace uqr::entropy {

using dynamics::MapHandle;
using geometry::ChainMetric;
using geometry::ManifoldId;
using geometry::Point;
using geometry::ProductPoint;

// =============================================================================
// Chain clouds
// =============================================================================

/// Torus base points i/res on every axis (res^n points).
struct GridSource {
  int resolution = 512;
};

/// Uniform random base points.
struct RandomSource {
  std::size_t count = 300'000;
  std::uint64_t seed = 1;
};

using BaseSource = std::variant<GridSource, RandomSource>;

std::size_t base_count(const ManifoldId& m, const BaseSource& base);
std::vector<Point> base_points(const ManifoldId& m, const BaseSource& base);

/// Flat storage of orbit tuples (x, f x, ..., f^k x): [chain][entry][coord].
class ChainCloud {
 public:
  ChainCloud(const ManifoldId& m, int k, std::size_t count);
  static ChainCloud from_product_points(const std::vector<ProductPoint>& chains);

  const ManifoldId& manifold() const { return manifold_; }
  int k() const { return k_; }
  std::size_t size() const { return count_; }

  const double* entry(std::size_t chain, int j) const {
    return data_.data() + (chain * stride_ + static_cast<std::size_t>(j) * amb_);
  }
  double* entry(std::size_t chain, int j) {
    return data_.data() + (chain * stride_ + static_cast<std::size_t>(j) * amb_);
  }
  ProductPoint chain(std::size_t i) const;

  /// Copy of the chains at the given indices (in that order).
  ChainCloud subset(const std::vector<std::size_t>& indices) const;

  /// A quarter-density sub-sample of the base points (the even sub-grid for
  /// grid sources, every 2^n-th point otherwise) used to test resolution.
  const std::vector<std::size_t>& coarse_indices() const { return coarse_; }
  void set_coarse_indices(std::vector<std::size_t> idx) { coarse_ = std::move(idx); }

 private:
  ManifoldId manifold_;
  int k_;
  std::size_t count_;
  std::size_t amb_;
  std::size_t stride_;
  std::vector<double> data_;
  std::vector<std::size_t> coarse_;
};

ChainCloud chain_cloud(const MapHandle& f, int k, const BaseSource& base);

// =============================================================================
// Separated sets
// =============================================================================

struct SeparatedSetResult {
  double eps = 0.0;
  int k = 0;
  std::size_t count = 0;
  std::size_t base_samples = 0;
  ChainMetric metric = ChainMetric::sup;
  std::vector<std::size_t> kept;  // indices into the cloud, in keep order
  /// A maximal (greedy) eps-separated set satisfies N_{2 eps} <= count <= N_eps.
  std::string bracket = "N_2eps <= count <= N_eps";
};

/// Greedy maximal eps-separated subset in input order, using the first k+1
/// chain entries (k = -1: all). Neighbor search uses a uniform cell grid over
/// hashed chain entries with cell side >= eps.
SeparatedSetResult pack_separated(const ChainCloud& cloud, double eps,
                                  ChainMetric metric = ChainMetric::sup, int k = -1);

// =============================================================================
// Entropy estimators
// =============================================================================

struct HEpsResult {
  double eps = 0.0;
  std::vector<int> ks;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> coarse_counts;  // same packing on the coarse sub-sample
  std::vector<bool> saturated;   // count > 50% of the base samples
  std::vector<bool> unresolved;  // coarse count below 90% of the full count, or
                                 // coarse count > 50% of the coarse sample
  std::vector<int> window;       // k values used for the fit (neither flag set)
  double slope = 0.0;
  double residual = 0.0;         // max |log count - fit| over the window
  bool flagged = false;          // fewer than three usable k values
  std::size_t base_samples = 0;
};

/// Least-squares slope of log N_eps(Chain_k) against k. A k value enters the
/// fit only if the base samples resolve it: the count is at most half the base
/// samples, and a quarter-density sub-sample reproduces at least 90% of it.
HEpsResult h_eps_estimate(const MapHandle& f, double eps, const std::vector<int>& k_range,
                          const BaseSource& base);
HEpsResult h_eps_from_cloud(const ChainCloud& cloud, double eps, const std::vector<int>& k_range);

struct EntropyEstimate {
  double value = 0.0;  // nats
  double eps_used = 0.0;
  std::vector<HEpsResult> per_eps;
  bool slopes_monotone = true;  // slopes non-decreasing as eps decreases
  std::string extrapolation =
      "least-squares slope of log count over the k-window of resolved, unsaturated runs; value "
      "taken at the smallest eps whose run has at least three such k";
};

/// Per-run rows: k, eps, count, slope, residual, flags.
CsvTable entropy_table(const EntropyEstimate& e);
nlohmann::json to_json(const EntropyEstimate& e);

/// Throws BudgetError when every eps run is saturation-flagged.
EntropyEstimate topological_entropy_estimate(const MapHandle& f, const std::vector<double>& eps_schedule,
                                             const std::vector<int>& k_range, const BaseSource& base);
EntropyEstimate topological_entropy_from_cloud(const ChainCloud& cloud, const std::vector<double>& eps_schedule,
                                               const std::vector<int>& k_range);

struct LovResult {
  double slope = 0.0;
  std::vector<int> ks;
  std::vector<graph::VolumeEstimate> volumes;
  bool flagged = false;
};

/// Slope of log H^n(Chain_k) against k.
LovResult lov_estimate(const MapHandle& f, const std::vector<int>& k_range, std::size_t mc_samples,
                       const SeedStream& rng);

struct LodnResult {
  double eps = 0.0;
  double slope = 0.0;
  std::vector<int> ks;
  std::vector<double> density;       // min local volume over centers, per k
  std::vector<double> density_error; // its MC standard error
  std::vector<Point> centers;
  bool flagged = false;
};

/// Slope of log Dens_eps(Chain_k) against k; Dens is the minimum over sampled
/// centers of the sup-metric local chain volume.
LodnResult lodn_estimate(const MapHandle& f, double eps, const std::vector<int>& k_range,
                         std::size_t centers, std::size_t local_samples, const SeedStream& rng);

struct Theorem31Config {
  std::vector<double> eps_schedule{0.2, 0.1, 0.05};
  std::vector<int> k_range{1, 2, 3, 4, 5, 6};
  BaseSource base = GridSource{512};
  std::size_t volume_samples = 20'000;
  std::size_t centers = 10;
  std::size_t local_samples = 4000;
  double tolerance = 0.1;
  std::uint64_t seed = 1;
};

/// h <= lov - lodn at the estimator level, and
/// H^n(Chain_k) >= N_{2 eps}(Chain_k) Dens_eps(Chain_k) for every (k, eps).
AuditReport audit_theorem_3_1(const MapHandle& f, const Theorem31Config& config,
                              const EntropyEstimate* precomputed = nullptr);

}  // namespace uqr::entropy
