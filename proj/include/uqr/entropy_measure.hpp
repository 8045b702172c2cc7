#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqr/dynamics.hpp"
#include "uqr/measures.hpp"

namespace uqr::entropy {

using dynamics::MapHandle;
using geometry::ManifoldId;
using geometry::Point;
using measures::EmpiricalMeasure;

/// J_{f,mu}(x) = deg f / i(x, f), the Jacobian of f for a balanced measure.
double mt_jacobian(const MapHandle& f, const Point& x);

struct LowerBoundOptions {
  /// Warn when balancedness_residual exceeds this.
  double residual_threshold = 0.05;
  /// The residual costs one preimage sweep per atom; large clouds may skip it.
  bool check_balanced = true;
};

struct LowerBoundReport {
  double bound = 0.0;        // log deg f - int log i(x, f) dmu
  double log_degree = 0.0;
  double branch_mass = 0.0;  // mass of atoms with i(x, f) > 1
  double residual = -1.0;    // balancedness residual; -1 when not computed
  std::vector<std::string> warnings;
};

/// Lower bound for the entropy of f with respect to a balanced probability
/// measure mu. Throws DomainError unless mu has total mass 1 (within 1e-9).
LowerBoundReport entropy_lower_bound_report(const MapHandle& f, const EmpiricalMeasure& mu,
                                            const LowerBoundOptions& opts = {});

/// Finite partition into half-open cells: dyadic boxes of side 2^-depth on the
/// torus, or lon x lat cells (equal angle) on the sphere.
class PartitionSpec {
 public:
  static PartitionSpec dyadic(const ManifoldId& m, int depth);
  static PartitionSpec lon_lat(int lon, int lat);

  const ManifoldId& manifold() const { return manifold_; }
  std::size_t cell_count() const;
  std::uint32_t cell(const Point& x) const;
  std::uint32_t cell_raw(const double* c) const;
  std::string describe() const;

 private:
  ManifoldId manifold_;
  int depth_ = 0;
  int lon_ = 0;
  int lat_ = 0;
};

struct KsEstimate {
  double value = 0.0;                 // conditional entropy at k_max (nats)
  std::vector<double> sequence;       // k = 1..k_max
  std::size_t atoms = 0;
  std::size_t cells = 0;
  double undersampled_mass = 0.0;     // mass in joint classes with < 10 atoms at k_max
  std::vector<std::string> warnings;
};

/// Plug-in H(xi | f^-1 xi v ... v f^-k xi): each atom is labeled by the cells of
/// x, f x, ..., f^k x, and the entropy of the first label given the others is
/// computed from weighted counts.
KsEstimate ks_entropy_estimate(const MapHandle& f, const EmpiricalMeasure& mu, const PartitionSpec& partition,
                               int k_max);

/// {bound, branch_mass, ks_sequence, warnings}.
nlohmann::json measure_entropy_json(const LowerBoundReport& lb, const KsEstimate* ks);

}  // namespace uqr::entropy
