#include "uqr/entropy_top.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "uqr/errors.hpp"
#include "uqr/parallel.hpp"

namespace uqr::entropy {

namespace {

struct Fit {
  double slope = 0.0;
  double residual = 0.0;
};

Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  Fit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = my + fit.slope * (x[i] - mx);
    fit.residual = std::max(fit.residual, std::abs(y[i] - pred));
  }
  return fit;
}

void require_k_range(const std::vector<int>& ks, const char* who) {
  if (ks.size() < 3) throw DomainError(std::string(who) + ": k range needs at least 3 values");
  for (int k : ks)
    if (k < 0) throw DomainError(std::string(who) + ": k must be nonnegative");
}

// Uniform cell grid over a few hashed coordinates. Cells have side >= eps in
// every hashed coordinate, so two chains closer than eps in either chain metric
// sit in the same or adjacent cells.
constexpr std::size_t kMaxHashDims = 6;
using Cell = std::array<long, kMaxHashDims>;

class CellGrid {
 public:
  CellGrid(const ChainCloud& cloud, int k, double eps) : cloud_(cloud) {
    const ManifoldId& m = cloud.manifold();
    const int amb = m.ambient_dim();
    // Hash the last chain entry (the most expanded one) and, when both fit in
    // six coordinates, the base point.
    entries_ = {k};
    if (k > 0 && 2 * amb <= static_cast<int>(kMaxHashDims)) entries_.push_back(0);
    torus_ = m.is_torus();
    // Per-coordinate differences of close entries stay below reach_.
    reach_ = eps;
    double extent = 1.0;
    if (!torus_) {
      reach_ = eps >= std::numbers::pi ? 2.0 : 2.0 * std::sin(eps / 2.0);
      extent = 2.0;
    }
    for (int e : entries_)
      for (int c = 0; c < amb; ++c) dims_.push_back({e, c});
    bits_ = 64 / static_cast<int>(dims_.size());
    cells_ = std::max(1L, static_cast<long>(std::floor(extent / reach_)));
    cells_ = std::min(cells_, (1L << bits_) - 1);
    side_ = extent / static_cast<double>(cells_);
  }

  std::size_t dims() const { return dims_.size(); }

  // Cell of chain i, plus per axis whether the lower / upper neighbor can hold
  // a close entry.
  Cell cell_of(std::size_t i, std::array<bool, kMaxHashDims>& lower, std::array<bool, kMaxHashDims>& upper) const {
    Cell cell{};
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      double v = cloud_.entry(i, dims_[d].first)[dims_[d].second];
      if (!torus_) v += 1.0;
      const long c = std::clamp(static_cast<long>(std::floor(v / side_)), 0L, cells_ - 1);
      cell[d] = c;
      const double off = v - static_cast<double>(c) * side_;
      lower[d] = off < reach_ + 1e-12;
      upper[d] = side_ - off < reach_ + 1e-12;
    }
    return cell;
  }

  std::uint64_t key(const Cell& cell) const {
    std::uint64_t k = 0;
    for (std::size_t d = 0; d < dims_.size(); ++d) k = (k << bits_) | static_cast<std::uint64_t>(cell[d]);
    return k;
  }

  // Calls visit(key) for every distinct cell that can hold an entry close to
  // the one that produced (cell, lower, upper).
  template <class Visit>
  void neighbors(const Cell& cell, const std::array<bool, kMaxHashDims>& lower,
                 const std::array<bool, kMaxHashDims>& upper, Visit&& visit) const {
    const std::size_t nd = dims_.size();
    std::array<std::array<long, 3>, kMaxHashDims> opts{};
    std::array<std::size_t, kMaxHashDims> count{};
    for (std::size_t d = 0; d < nd; ++d) {
      std::size_t n = 0;
      auto add = [&](long c) {
        if (torus_) c = ((c % cells_) + cells_) % cells_;
        else if (c < 0 || c >= cells_) return;
        for (std::size_t q = 0; q < n; ++q)
          if (opts[d][q] == c) return;
        opts[d][n++] = c;
      };
      add(cell[d]);
      if (lower[d] || cells_ < 3) add(cell[d] - 1);
      if (upper[d] || cells_ < 3) add(cell[d] + 1);
      count[d] = n;
    }
    std::array<std::size_t, kMaxHashDims> idx{};
    Cell cur{};
    while (true) {
      for (std::size_t d = 0; d < nd; ++d) cur[d] = opts[d][idx[d]];
      if (visit(key(cur))) return;
      std::size_t d = 0;
      while (d < nd && ++idx[d] == count[d]) idx[d++] = 0;
      if (d == nd) return;
    }
  }

 private:
  const ChainCloud& cloud_;
  std::vector<int> entries_;
  std::vector<std::pair<int, int>> dims_;
  int bits_ = 16;
  long cells_ = 1;
  double side_ = 1.0;
  double reach_ = 1.0;
  bool torus_ = true;
};

// Open-addressing map from cell key to the most recently kept chain in that
// cell; earlier chains of the same cell are linked through `next`. The table
// grows with the number of occupied cells so small packings stay in cache.
class CellTable {
 public:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  explicit CellTable(std::size_t max_entries) : next_(max_entries, kNone) { rehash(64); }

  std::uint32_t head(std::uint64_t key) const {
    for (std::size_t s = slot(key);; s = (s + 1) & mask_) {
      if (keys_[s] == key) return heads_[s];
      if (keys_[s] == kEmpty) return kNone;
    }
  }
  std::uint32_t next(std::uint32_t i) const { return next_[i]; }

  void insert(std::uint64_t key, std::uint32_t i) {
    std::size_t s = find_slot(key);
    if (keys_[s] == kEmpty) {
      if (2 * (used_ + 1) > keys_.size()) {
        rehash(2 * keys_.size());
        s = find_slot(key);
      }
      keys_[s] = key;
      ++used_;
    }
    next_[i] = heads_[s];
    heads_[s] = i;
  }

 private:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  std::size_t slot(std::uint64_t key) const {
    return static_cast<std::size_t>((key * 0x9E3779B97F4A7C15ull) >> shift_);
  }
  std::size_t find_slot(std::uint64_t key) const {
    std::size_t s = slot(key);
    while (keys_[s] != key && keys_[s] != kEmpty) s = (s + 1) & mask_;
    return s;
  }
  void rehash(std::size_t cap) {
    std::vector<std::uint64_t> old_keys(cap, kEmpty);
    std::vector<std::uint32_t> old_heads(cap, kNone);
    old_keys.swap(keys_);
    old_heads.swap(heads_);
    mask_ = cap - 1;
    shift_ = 64 - std::countr_zero(cap);
    for (std::size_t t = 0; t < old_keys.size(); ++t) {
      if (old_keys[t] == kEmpty) continue;
      const std::size_t s = find_slot(old_keys[t]);
      keys_[s] = old_keys[t];
      heads_[s] = old_heads[t];
    }
  }

  std::size_t mask_ = 0;
  int shift_ = 58;
  std::size_t used_ = 0;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> heads_;
  std::vector<std::uint32_t> next_;
};

double entry_dist2_torus(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int c = 0; c < n; ++c) {
    double d = std::abs(a[c] - b[c]);
    d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return s;
}

double entry_chord2(const double* a, const double* b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// True when chains i and j are closer than eps in the chosen metric.
class CloseTest {
 public:
  CloseTest(const ChainCloud& cloud, int k, double eps, ChainMetric metric)
      : cloud_(cloud), k_(k), eps_(eps), metric_(metric) {
    const ManifoldId& m = cloud.manifold();
    torus_ = m.is_torus();
    amb_ = m.ambient_dim();
    eps2_ = eps * eps;
    const double chord = 2.0 * std::sin(std::min(eps, std::numbers::pi) / 2.0);
    chord2_ = eps >= std::numbers::pi ? 5.0 : chord * chord;
  }

  bool operator()(std::size_t i, std::size_t j) const {
    if (metric_ == ChainMetric::sup) {
      for (int e = k_; e >= 0; --e) {
        const double* a = cloud_.entry(i, e);
        const double* b = cloud_.entry(j, e);
        if (torus_) {
          if (entry_dist2_torus(a, b, amb_) >= eps2_) return false;
        } else if (entry_chord2(a, b) >= chord2_) {
          return false;
        }
      }
      return true;
    }
    double s = 0.0;
    for (int e = k_; e >= 0; --e) {
      const double* a = cloud_.entry(i, e);
      const double* b = cloud_.entry(j, e);
      if (torus_) {
        s += entry_dist2_torus(a, b, amb_);
      } else {
        const double d = geometry::dist_raw(cloud_.manifold(), a, b);
        s += d * d;
      }
      if (s >= eps2_) return false;
    }
    return true;
  }

 private:
  const ChainCloud& cloud_;
  int k_;
  double eps_;
  ChainMetric metric_;
  bool torus_ = true;
  int amb_ = 2;
  double eps2_ = 0.0;
  double chord2_ = 0.0;
};

std::string flags_of(const HEpsResult& r, std::size_t i) {
  std::vector<std::string> parts;
  if (r.saturated[i]) parts.push_back("saturated");
  if (r.unresolved[i]) parts.push_back("unresolved");
  if (r.flagged) parts.push_back("window_short");
  std::string f;
  for (const auto& p : parts) f += (f.empty() ? "" : ";") + p;
  return f;
}

std::vector<std::size_t> strided_indices(std::size_t count, std::size_t step) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < count; i += step) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> even_subgrid(int n, std::size_t res) {
  std::vector<std::size_t> idx;
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= res;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    bool even = true;
    for (int d = 0; d < n && even; ++d) {
      even = (rem % res) % 2 == 0;
      rem /= res;
    }
    if (even) idx.push_back(i);
  }
  return idx;
}

}  // namespace

// -----------------------------------------------------------------------------
// Chain clouds
// -----------------------------------------------------------------------------

ChainCloud::ChainCloud(const ManifoldId& m, int k, std::size_t count)
    : manifold_(m),
      k_(k),
      count_(count),
      amb_(static_cast<std::size_t>(m.ambient_dim())),
      stride_(amb_ * static_cast<std::size_t>(k + 1)),
      data_(count * stride_) {
  if (k < 0) throw DomainError("ChainCloud: k must be nonnegative");
}

ChainCloud ChainCloud::from_product_points(const std::vector<ProductPoint>& chains) {
  if (chains.empty()) throw DomainError("ChainCloud: empty chain list");
  const ManifoldId m = chains.front().manifold();
  const int k = chains.front().k();
  ChainCloud cloud(m, k, chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (chains[i].k() != k || !(chains[i].manifold() == m))
      throw DomainError("ChainCloud: chains differ in length or manifold");
    for (int j = 0; j <= k; ++j) {
      const auto c = chains[i][static_cast<std::size_t>(j)].coords();
      std::copy(c.begin(), c.end(), cloud.entry(i, j));
    }
  }
  cloud.set_coarse_indices(strided_indices(chains.size(), std::size_t{1} << m.dimension()));
  return cloud;
}

ProductPoint ChainCloud::chain(std::size_t i) const {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(k_ + 1));
  for (int j = 0; j <= k_; ++j) pts.emplace_back(manifold_, std::span<const double>(entry(i, j), amb_));
  return ProductPoint(std::move(pts));
}

ChainCloud ChainCloud::subset(const std::vector<std::size_t>& indices) const {
  ChainCloud out(manifold_, k_, indices.size());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] >= count_) throw DomainError("ChainCloud::subset: index out of range");
    std::copy_n(data_.data() + indices[t] * stride_, stride_, out.data_.data() + t * stride_);
  }
  return out;
}

std::size_t base_count(const ManifoldId& m, const BaseSource& base) {
  if (const auto* g = std::get_if<GridSource>(&base)) {
    if (!m.is_torus()) throw DomainError("grid base points are only defined on the torus");
    if (g->resolution < 1) throw DomainError("grid resolution must be positive");
    std::size_t total = 1;
    for (int d = 0; d < m.dimension(); ++d) total *= static_cast<std::size_t>(g->resolution);
    return total;
  }
  const auto& r = std::get<RandomSource>(base);
  if (r.count == 0) throw DomainError("random base source needs at least one sample");
  return r.count;
}

std::vector<Point> base_points(const ManifoldId& m, const BaseSource& base) {
  const std::size_t total = base_count(m, base);
  std::vector<Point> pts(total);
  if (const auto* g = std::get_if<GridSource>(&base)) {
    const int n = m.dimension();
    const auto res = static_cast<std::size_t>(g->resolution);
    for (std::size_t i = 0; i < total; ++i) {
      std::array<double, geometry::kMaxAmbient> c{};
      std::size_t rem = i;
      // Last axis varies fastest.
      for (int d = n - 1; d >= 0; --d) {
        c[static_cast<std::size_t>(d)] = static_cast<double>(rem % res) / static_cast<double>(res);
        rem /= res;
      }
      pts[i] = Point(m, std::span<const double>(c.data(), static_cast<std::size_t>(n)));
    }
    return pts;
  }
  const SeedStream root(std::get<RandomSource>(base).seed);
  parallel_for(total, [&](std::size_t i) {
    SeedStream s = root.split(i);
    pts[i] = geometry::sample_uniform(m, s);
  });
  return pts;
}

ChainCloud chain_cloud(const MapHandle& f, int k, const BaseSource& base) {
  if (k < 0) throw DomainError("chain_cloud: k must be nonnegative");
  const ManifoldId& m = f.manifold();
  const std::vector<Point> pts = base_points(m, base);
  ChainCloud cloud(m, k, pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    Point x = pts[i];
    for (int j = 0; j <= k; ++j) {
      if (j > 0) x = f.eval(x);
      const auto c = x.coords();
      std::copy(c.begin(), c.end(), cloud.entry(i, j));
    }
  });
  if (const auto* g = std::get_if<GridSource>(&base))
    cloud.set_coarse_indices(even_subgrid(m.dimension(), static_cast<std::size_t>(g->resolution)));
  else
    cloud.set_coarse_indices(strided_indices(pts.size(), std::size_t{1} << m.dimension()));
  return cloud;
}

// -----------------------------------------------------------------------------
// Separated sets
// -----------------------------------------------------------------------------

SeparatedSetResult pack_separated(const ChainCloud& cloud, double eps, ChainMetric metric, int k) {
  if (!(eps > 0.0)) throw DomainError("pack_separated: eps must be positive");
  if (k < 0) k = cloud.k();
  if (k > cloud.k()) throw DomainError("pack_separated: k exceeds the cloud's chain length");

  SeparatedSetResult res;
  res.eps = eps;
  res.k = k;
  res.metric = metric;
  res.base_samples = cloud.size();

  const CellGrid grid(cloud, k, eps);
  const CloseTest close(cloud, k, eps, metric);
  CellTable table(cloud.size());
  std::array<bool, kMaxHashDims> lower{}, upper{};

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Cell cell = grid.cell_of(i, lower, upper);
    bool blocked = false;
    grid.neighbors(cell, lower, upper, [&](std::uint64_t key) {
      for (std::uint32_t j = table.head(key); j != CellTable::kNone; j = table.next(j)) {
        if (close(i, j)) {
          blocked = true;
          return true;
        }
      }
      return false;
    });
    if (!blocked) {
      table.insert(grid.key(cell), static_cast<std::uint32_t>(i));
      res.kept.push_back(i);
    }
  }
  res.count = res.kept.size();
  return res;
}

// -----------------------------------------------------------------------------
// Entropy estimators
// -----------------------------------------------------------------------------

HEpsResult h_eps_from_cloud(const ChainCloud& cloud, double eps, const std::vector<int>& k_range) {
  require_k_range(k_range, "h_eps_estimate");
  HEpsResult r;
  r.eps = eps;
  r.ks = k_range;
  r.base_samples = cloud.size();
  const std::size_t nk = k_range.size();
  r.counts.assign(nk, 0);
  r.coarse_counts.assign(nk, 0);
  const ChainCloud coarse = cloud.subset(cloud.coarse_indices());
  parallel_for(2 * nk, [&](std::size_t t) {
    const std::size_t i = t % nk;
    if (t < nk) r.counts[i] = pack_separated(cloud, eps, ChainMetric::sup, k_range[i]).count;
    else r.coarse_counts[i] = pack_separated(coarse, eps, ChainMetric::sup, k_range[i]).count;
  });
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < nk; ++i) {
    const bool sat = 2 * r.counts[i] > cloud.size();
    const bool unres = coarse.size() == 0 || 2 * r.coarse_counts[i] > coarse.size() ||
                       10 * r.coarse_counts[i] < 9 * r.counts[i];
    r.saturated.push_back(sat);
    r.unresolved.push_back(unres);
    if (!sat && !unres) {
      r.window.push_back(k_range[i]);
      xs.push_back(k_range[i]);
      ys.push_back(std::log(static_cast<double>(r.counts[i])));
    }
  }
  r.flagged = r.window.size() < 3;
  if (r.flagged) {
    // Report the fit over everything, but the run is not trusted.
    xs.clear();
    ys.clear();
    for (std::size_t i = 0; i < nk; ++i) {
      xs.push_back(k_range[i]);
      ys.push_back(std::log(static_cast<double>(r.counts[i])));
    }
  }
  const Fit fit = least_squares(xs, ys);
  r.slope = fit.slope;
  r.residual = fit.residual;
  return r;
}

HEpsResult h_eps_estimate(const MapHandle& f, double eps, const std::vector<int>& k_range,
                          const BaseSource& base) {
  require_k_range(k_range, "h_eps_estimate");
  const int kmax = *std::max_element(k_range.begin(), k_range.end());
  return h_eps_from_cloud(chain_cloud(f, kmax, base), eps, k_range);
}

EntropyEstimate topological_entropy_from_cloud(const ChainCloud& cloud, const std::vector<double>& eps_schedule,
                                               const std::vector<int>& k_range) {
  if (eps_schedule.size() < 3) throw DomainError("eps schedule needs at least 3 values");
  for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
    if (!(eps_schedule[i] > 0.0)) throw DomainError("eps values must be positive");
    if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))
      throw DomainError("eps schedule must be strictly decreasing");
  }
  EntropyEstimate est;
  for (double eps : eps_schedule) est.per_eps.push_back(h_eps_from_cloud(cloud, eps, k_range));

  bool found = false;
  for (auto it = est.per_eps.rbegin(); it != est.per_eps.rend(); ++it) {
    if (!it->flagged) {
      est.value = it->slope;
      est.eps_used = it->eps;
      found = true;
      break;
    }
  }
  // h_eps is non-decreasing as eps shrinks; allow a little estimator noise.
  for (std::size_t i = 1; i < est.per_eps.size(); ++i)
    if (est.per_eps[i].slope < est.per_eps[i - 1].slope - 0.05) est.slopes_monotone = false;
  if (!found)
    throw BudgetError("no eps run has three resolved k values; use a finer grid or more samples");
  return est;
}

EntropyEstimate topological_entropy_estimate(const MapHandle& f, const std::vector<double>& eps_schedule,
                                             const std::vector<int>& k_range, const BaseSource& base) {
  require_k_range(k_range, "topological_entropy_estimate");
  const int kmax = *std::max_element(k_range.begin(), k_range.end());
  return topological_entropy_from_cloud(chain_cloud(f, kmax, base), eps_schedule, k_range);
}

CsvTable entropy_table(const EntropyEstimate& e) {
  CsvTable t({"k", "eps", "count", "coarse_count", "slope", "residual", "flags"});
  for (const HEpsResult& r : e.per_eps)
    for (std::size_t i = 0; i < r.ks.size(); ++i)
      t.add_row({static_cast<long long>(r.ks[i]), r.eps, static_cast<long long>(r.counts[i]),
                 static_cast<long long>(r.coarse_counts[i]), r.slope, r.residual, flags_of(r, i)});
  return t;
}

nlohmann::json to_json(const EntropyEstimate& e) {
  nlohmann::json j;
  j["value"] = e.value;
  j["eps_used"] = e.eps_used;
  j["slopes_monotone"] = e.slopes_monotone;
  j["extrapolation"] = e.extrapolation;
  j["per_eps"] = nlohmann::json::array();
  for (const HEpsResult& r : e.per_eps) {
    nlohmann::json row;
    row["eps"] = r.eps;
    row["slope"] = r.slope;
    row["residual"] = r.residual;
    row["k_window"] = r.window;
    row["ks"] = r.ks;
    row["counts"] = r.counts;
    row["coarse_counts"] = r.coarse_counts;
    row["flagged"] = r.flagged;
    row["base_samples"] = r.base_samples;
    j["per_eps"].push_back(row);
  }
  return j;
}

LovResult lov_estimate(const MapHandle& f, const std::vector<int>& k_range, std::size_t mc_samples,
                       const SeedStream& rng) {
  require_k_range(k_range, "lov_estimate");
  LovResult r;
  r.ks = k_range;
  std::vector<double> xs, ys;
  for (int k : k_range) {
    graph::VolumeEstimate v = graph::chain_volume(f, k, mc_samples, rng.split(static_cast<std::uint64_t>(k)));
    r.flagged = r.flagged || v.flagged;
    xs.push_back(k);
    ys.push_back(std::log(v.value));
    r.volumes.push_back(std::move(v));
  }
  r.slope = least_squares(xs, ys).slope;
  return r;
}

LodnResult lodn_estimate(const MapHandle& f, double eps, const std::vector<int>& k_range,
                         std::size_t centers, std::size_t local_samples, const SeedStream& rng) {
  require_k_range(k_range, "lodn_estimate");
  if (centers < 10) throw DomainError("lodn_estimate: need at least 10 centers");
  if (!(eps > 0.0)) throw DomainError("lodn_estimate: eps must be positive");
  LodnResult r;
  r.eps = eps;
  r.ks = k_range;
  SeedStream cs = rng.split(0);
  for (std::size_t c = 0; c < centers; ++c) r.centers.push_back(geometry::sample_uniform(f.manifold(), cs));

  std::vector<double> xs, ys;
  for (std::size_t ki = 0; ki < k_range.size(); ++ki) {
    const int k = k_range[ki];
    double best = std::numeric_limits<double>::infinity();
    double best_se = 0.0;
    for (std::size_t c = 0; c < centers; ++c) {
      const graph::VolumeEstimate v =
          graph::local_volume(f, k, r.centers[c], eps, ChainMetric::sup, local_samples,
                              rng.split(1 + ki * centers + c));
      r.flagged = r.flagged || v.flagged;
      if (v.value < best) {
        best = v.value;
        best_se = v.std_error;
      }
    }
    r.density.push_back(best);
    r.density_error.push_back(best_se);
    xs.push_back(k);
    ys.push_back(std::log(best));
  }
  r.slope = least_squares(xs, ys).slope;
  return r;
}

namespace {

// Greedy packing is deterministic, so a run of the estimate on the same cloud gives the same count.
bool reuse_count(const EntropyEstimate& h, double eps, int k, std::size_t base, std::size_t& out) {
  for (const HEpsResult& r : h.per_eps) {
    if (r.base_samples != base || std::abs(r.eps - eps) > 1e-12 * eps) continue;
    for (std::size_t i = 0; i < r.ks.size(); ++i)
      if (r.ks[i] == k) {
        out = r.counts[i];
        return true;
      }
  }
  return false;
}

}  // namespace

AuditReport audit_theorem_3_1(const MapHandle& f, const Theorem31Config& config,
                              const EntropyEstimate* precomputed) {
  AuditReport rep;
  rep.name = "chain volume vs separation and density";
  rep.tolerance = config.tolerance;

  nlohmann::json cfg;
  cfg["map"] = f.describe();
  cfg["eps_schedule"] = config.eps_schedule;
  cfg["k_range"] = config.k_range;
  if (const auto* g = std::get_if<GridSource>(&config.base)) cfg["grid"] = g->resolution;
  else {
    cfg["random_samples"] = std::get<RandomSource>(config.base).count;
    cfg["random_seed"] = std::get<RandomSource>(config.base).seed;
  }
  cfg["volume_samples"] = config.volume_samples;
  cfg["centers"] = config.centers;
  cfg["local_samples"] = config.local_samples;
  cfg["tolerance"] = config.tolerance;
  cfg["seed"] = config.seed;
  rep.config_digest = config_digest(cfg);

  require_k_range(config.k_range, "audit_theorem_3_1");
  const int kmax = *std::max_element(config.k_range.begin(), config.k_range.end());
  const ChainCloud cloud = chain_cloud(f, kmax, config.base);
  const SeedStream root(config.seed);

  const EntropyEstimate h =
      precomputed ? *precomputed : topological_entropy_from_cloud(cloud, config.eps_schedule, config.k_range);
  const LovResult lov = lov_estimate(f, config.k_range, config.volume_samples, root.split(1));
  std::vector<LodnResult> lodn;
  for (std::size_t e = 0; e < config.eps_schedule.size(); ++e)
    lodn.push_back(lodn_estimate(f, config.eps_schedule[e], config.k_range, config.centers,
                                 config.local_samples, root.split(2 + e)));

  // Finite-k inequality: H^n(Chain_k) >= #E * Dens_eps for a 2 eps-separated E.
  bool finite_ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t e = 0; e < config.eps_schedule.size(); ++e) {
    const double eps = config.eps_schedule[e];
    for (std::size_t ki = 0; ki < config.k_range.size(); ++ki) {
      const int k = config.k_range[ki];
      std::size_t count = 0;
      if (!reuse_count(h, 2.0 * eps, k, cloud.size(), count))
        count = pack_separated(cloud, 2.0 * eps, ChainMetric::sup, k).count;
      const double dens = lodn[e].density[ki];
      const double lhs = static_cast<double>(count) * dens;
      const double rhs = lov.volumes[ki].value;
      const double err = 2.0 * (static_cast<double>(count) * lodn[e].density_error[ki] + lov.volumes[ki].std_error);
      const bool ok = lhs <= rhs + err;
      finite_ok = finite_ok && ok;
      rows.push_back({{"k", k},
                      {"eps", eps},
                      {"separated_count_2eps", count},
                      {"density_eps", dens},
                      {"lhs", lhs},
                      {"chain_volume", rhs},
                      {"error_bar", err},
                      {"slack", rhs - lhs},
                      {"pass", ok}});
    }
  }

  const LodnResult& fine = lodn.back();
  rep.lhs = h.value;
  rep.rhs = lov.slope - fine.slope;
  rep.decide_inequality();
  const bool limit_ok = rep.pass;
  rep.pass = limit_ok && finite_ok;

  rep.details["entropy"] = to_json(h);
  rep.details["lov"] = lov.slope;
  rep.details["lov_flagged"] = lov.flagged;
  rep.details["lodn"] = fine.slope;
  rep.details["lodn_eps"] = fine.eps;
  nlohmann::json per_eps = nlohmann::json::array();
  for (const LodnResult& l : lodn)
    per_eps.push_back({{"eps", l.eps}, {"lodn", l.slope}, {"density", l.density}, {"flagged", l.flagged}});
  rep.details["lodn_per_eps"] = per_eps;
  rep.details["limit_inequality_pass"] = limit_ok;
  rep.details["finite_k"] = rows;
  rep.details["finite_k_pass"] = finite_ok;
  rep.notes.push_back("separated counts are greedy maximal packings; any 2 eps-separated set bounds the volume");
  rep.notes.push_back("density is the minimum local volume over the sampled centers");
  rep.notes.push_back("finite-k rows pass when lhs <= volume + 2 standard errors");
  return rep;
}

}  // namespace uqr::entropy
