#include "uqr/entropy_measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "uqr/errors.hpp"
#include "uqr/parallel.hpp"
#include "uqr/report.hpp"

namespace uqr::entropy {

double mt_jacobian(const MapHandle& f, const Point& x) {
  return static_cast<double>(f.degree()) / static_cast<double>(f.local_index(x));
}

LowerBoundReport entropy_lower_bound_report(const MapHandle& f, const EmpiricalMeasure& mu,
                                            const LowerBoundOptions& opts) {
  if (!(mu.manifold() == f.manifold())) throw DomainError("measure and map live on different manifolds");
  mu.require_probability(1e-9);
  LowerBoundReport r;
  r.log_degree = std::log(static_cast<double>(f.degree()));
  std::vector<double> log_i(mu.size()), branch(mu.size());
  parallel_for(mu.size(), [&](std::size_t i) {
    const int idx = f.local_index(mu.atom(i));
    log_i[i] = idx > 1 ? mu.weight(i) * std::log(static_cast<double>(idx)) : 0.0;
    branch[i] = idx > 1 ? mu.weight(i) : 0.0;
  });
  r.bound = r.log_degree - pairwise_sum(log_i);
  r.branch_mass = pairwise_sum(branch);
  if (opts.check_balanced) {
    r.residual = measures::balancedness_residual(f, mu, measures::default_test_family(mu.manifold())).residual;
    if (r.residual > opts.residual_threshold)
      r.warnings.push_back("measure is not balanced: residual " + format_double(r.residual) + " exceeds " +
                           format_double(opts.residual_threshold));
  }
  return r;
}

// -----------------------------------------------------------------------------
// Partitions
// -----------------------------------------------------------------------------

PartitionSpec PartitionSpec::dyadic(const ManifoldId& m, int depth) {
  if (!m.is_torus()) throw DomainError("dyadic partitions are defined on the torus");
  if (depth < 0 || depth * m.dimension() > 30) throw DomainError("dyadic depth out of range");
  PartitionSpec p;
  p.manifold_ = m;
  p.depth_ = depth;
  return p;
}

PartitionSpec PartitionSpec::lon_lat(int lon, int lat) {
  if (lon < 1 || lat < 1 || static_cast<long long>(lon) * lat > (1LL << 30))
    throw DomainError("lon/lat cell counts out of range");
  PartitionSpec p;
  p.manifold_ = ManifoldId::sphere2();
  p.lon_ = lon;
  p.lat_ = lat;
  return p;
}

std::size_t PartitionSpec::cell_count() const {
  if (manifold_.is_torus()) return std::size_t{1} << (depth_ * manifold_.dimension());
  return static_cast<std::size_t>(lon_) * static_cast<std::size_t>(lat_);
}

std::uint32_t PartitionSpec::cell_raw(const double* c) const {
  if (manifold_.is_torus()) {
    const std::uint32_t side = 1u << depth_;
    std::uint32_t id = 0;
    for (int d = 0; d < manifold_.dimension(); ++d) {
      auto v = static_cast<std::uint32_t>(std::floor(c[d] * side));
      id = id * side + std::min(v, side - 1);
    }
    return id;
  }
  const double phi = std::atan2(c[1], c[0]);  // (-pi, pi]
  const double theta = std::asin(std::clamp(c[2], -1.0, 1.0));
  auto a = static_cast<long>(std::floor((phi + std::numbers::pi) / (2.0 * std::numbers::pi) * lon_));
  auto b = static_cast<long>(std::floor((theta + std::numbers::pi / 2.0) / std::numbers::pi * lat_));
  a = std::clamp(a, 0L, static_cast<long>(lon_) - 1);
  b = std::clamp(b, 0L, static_cast<long>(lat_) - 1);
  return static_cast<std::uint32_t>(b * lon_ + a);
}

std::uint32_t PartitionSpec::cell(const Point& x) const {
  if (!(x.manifold() == manifold_)) throw DomainError("point and partition live on different manifolds");
  return cell_raw(x.coords().data());
}

std::string PartitionSpec::describe() const {
  if (manifold_.is_torus()) return "dyadic depth " + std::to_string(depth_) + " on " + manifold_.name();
  return "lon/lat " + std::to_string(lon_) + "x" + std::to_string(lat_) + " on " + manifold_.name();
}

// -----------------------------------------------------------------------------
// Kolmogorov-Sinai estimate
// -----------------------------------------------------------------------------

namespace {

// Interns (a, b) pairs into dense ids in first-seen order.
class PairInterner {
 public:
  std::uint32_t operator()(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    const auto [it, inserted] = ids_.try_emplace(key, static_cast<std::uint32_t>(ids_.size()));
    return it->second;
  }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::uint64_t, std::uint32_t> ids_;
};

double label_entropy(const std::vector<std::uint32_t>& labels, std::size_t classes,
                     std::span<const double> weights, double total) {
  std::vector<double> mass(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) mass[labels[i]] += weights[i];
  for (double& m : mass) {
    const double p = m / total;
    m = p > 0.0 ? -p * std::log(p) : 0.0;
  }
  return pairwise_sum(mass);
}

}  // namespace

KsEstimate ks_entropy_estimate(const MapHandle& f, const EmpiricalMeasure& mu, const PartitionSpec& partition,
                               int k_max) {
  if (k_max < 1) throw DomainError("ks_entropy_estimate: k_max must be at least 1");
  if (!(mu.manifold() == f.manifold()) || !(partition.manifold() == f.manifold()))
    throw DomainError("ks_entropy_estimate: map, measure and partition must share a manifold");
  if (mu.empty()) throw DomainError("ks_entropy_estimate: empty measure");

  KsEstimate est;
  est.atoms = mu.size();
  est.cells = partition.cell_count();
  const double total = mu.total();
  const std::size_t n = mu.size();

  std::vector<Point> x(n);
  std::vector<std::uint32_t> first(n), rest(n), joint(n);
  parallel_for(n, [&](std::size_t i) {
    x[i] = mu.atom(i);
    first[i] = partition.cell(x[i]);
  });

  std::vector<std::uint32_t> cur(n);
  constexpr std::uint32_t kNone = 0xffffffffu;
  std::fill(rest.begin(), rest.end(), kNone);
  for (int k = 1; k <= k_max; ++k) {
    parallel_for(n, [&](std::size_t i) {
      x[i] = f.eval(x[i]);
      cur[i] = partition.cell(x[i]);
    });
    PairInterner rest_ids, joint_ids;
    for (std::size_t i = 0; i < n; ++i) rest[i] = rest_ids(rest[i], cur[i]);
    for (std::size_t i = 0; i < n; ++i) joint[i] = joint_ids(first[i], rest[i]);
    const double h = label_entropy(joint, joint_ids.size(), mu.weights(), total) -
                     label_entropy(rest, rest_ids.size(), mu.weights(), total);
    est.sequence.push_back(std::max(h, 0.0));

    if (k == k_max) {
      std::vector<std::uint32_t> sizes(joint_ids.size(), 0);
      for (std::uint32_t id : joint) ++sizes[id];
      std::vector<double> thin(n);
      for (std::size_t i = 0; i < n; ++i) thin[i] = sizes[joint[i]] < 10 ? mu.weight(i) : 0.0;
      est.undersampled_mass = pairwise_sum(thin) / total;
    }
  }
  est.value = est.sequence.back();
  if (est.atoms < 100 * est.cells)
    est.warnings.push_back("undersampled: " + std::to_string(est.atoms) + " atoms for " +
                           std::to_string(est.cells) + " cells; mass in thin classes " +
                           format_double(est.undersampled_mass));
  return est;
}

nlohmann::json measure_entropy_json(const LowerBoundReport& lb, const KsEstimate* ks) {
  nlohmann::json j;
  j["bound"] = lb.bound;
  j["log_degree"] = lb.log_degree;
  j["branch_mass"] = lb.branch_mass;
  if (lb.residual >= 0.0) j["balancedness_residual"] = lb.residual;
  std::vector<std::string> warnings = lb.warnings;
  if (ks) {
    j["ks_sequence"] = ks->sequence;
    j["ks_value"] = ks->value;
    j["ks_undersampled_mass"] = ks->undersampled_mass;
    warnings.insert(warnings.end(), ks->warnings.begin(), ks->warnings.end());
  } else {
    j["ks_sequence"] = nlohmann::json::array();
  }
  j["warnings"] = warnings;
  return j;
}

}  // namespace uqr::entropy
