#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqr/dynamics.hpp"
#include "uqr/geometry.hpp"
#include "uqr/report.hpp"
#include "uqr/rng.hpp"

namespace uqr::graph {

using dynamics::MapHandle;
using dynamics::Matrix;
using geometry::ChainMetric;
using geometry::Point;
using geometry::ProductPoint;

/// sqrt(det sum_j D_j^T D_j) for stacked differentials D_j.
double gram_jacobian(const std::vector<Matrix>& ds);

/// |J_{g_k}|(x) for the chain map g_k = (id, f, ..., f^k).
double n_jacobian(const MapHandle& f, int k, const Point& x);

struct VolumeEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::size_t hits = 0;     // samples inside the region (local volumes)
  bool flagged = false;     // standard error above 10% of the estimate
  std::string normalization;
};

/// H^n(g_k(M)) via the area formula: the chain map is injective, so the
/// Hausdorff measure of the chain graph is the integral of |J_{g_k}| over M.
/// Uses stratified uniform samples (one per slab of the height coordinate).
VolumeEstimate chain_volume(const MapHandle& f, int k, std::size_t samples, const SeedStream& rng);

struct LocalVolumeOptions {
  /// Safety factor applied to the expansion-derived pullback radius.
  double pullback_safety = 1.25;
  /// Probability of drawing from the guaranteed superset B(x0, r).
  double superset_fraction = 0.2;
  /// When set, sample uniformly from B(x0, sampling_radius) only. Estimates for
  /// different r with the same stream then share samples (and are monotone in r).
  std::optional<double> sampling_radius;
};

/// H^n of {g_k(x) : dist(g_k(x), g_k(x0)) < r}. Importance sampling mixes a
/// small ball around x0, sized from the expansion of D f^j(x0), with the
/// superset B(x0, r) (first chain coordinate is the identity), so the estimator
/// stays unbiased. Throws BudgetError when no sample lands in the region.
VolumeEstimate local_volume(const MapHandle& f, int k, const Point& center, double r,
                            ChainMetric metric, std::size_t samples, const SeedStream& rng,
                            const LocalVolumeOptions& opts = {});

struct AhlforsRow {
  std::size_t center = 0;
  double r = 0.0;
  double volume = 0.0;
  double std_error = 0.0;
  double ratio = 0.0;  // volume / r^n
};

struct AhlforsScan {
  int k = 0;
  int n = 2;
  std::vector<ProductPoint> centers;
  std::vector<double> radii;
  std::vector<AhlforsRow> table;
  std::vector<double> center_slopes;
  double slope = 0.0;   // mean fitted log-log slope over centers
  double spread = 0.0;  // max ratio / min ratio over the whole table
  bool flagged = false;
  bool pass = false;
};

struct AhlforsOptions {
  double slope_tolerance = 0.2;
  double spread_bound = 4.0;
  std::size_t samples = 4000;
  std::uint64_t seed = 1;
};

AhlforsScan ahlfors_scan(const MapHandle& f, int k, const std::vector<Point>& centers,
                         const std::vector<double>& radii, const AhlforsOptions& opts = {});

/// One component f_j = map^power of a chain-type map g = (f_1, ..., f_k).
struct ComponentMap {
  MapHandle map;
  int power = 1;
};

/// Audits |J_g| <= n^{n/2} K k^{n/2-1} sum_j J_{f_j} at uniform samples.
/// K defaults to the larger of the sampled pointwise distortion and the
/// analytic bound of each component.
AuditReport check_pointwise_bound(const std::vector<ComponentMap>& components, std::size_t samples,
                                  const SeedStream& rng, std::optional<double> K = std::nullopt);

}  // namespace uqr::graph
