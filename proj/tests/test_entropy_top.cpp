#include <doctest.h>

#include <bitset>
#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "uqr/entropy_top.hpp"
#include "uqr/errors.hpp"

using namespace uqr;
using namespace uqr::entropy;
using geometry::ChainMetric;
using geometry::ManifoldId;
using geometry::Point;
using geometry::ProductPoint;

namespace {

constexpr std::size_t kMaxN = 256;
using Set = std::bitset<kMaxN>;

// Exact maximum independent set by branch and bound.
class MaxIndependentSet {
 public:
  explicit MaxIndependentSet(std::vector<Set> adj) : adj_(std::move(adj)) {}

  std::size_t solve(const Set& all) {
    std::size_t total = 0;
    Set rest = all;
    while (rest.any()) {
      const Set comp = component(rest);
      rest &= ~comp;
      best_ = 0;
      branch(comp, 0);
      total += best_;
    }
    return total;
  }

 private:
  std::size_t first(const Set& s) const {
    for (std::size_t v = 0; v < adj_.size(); ++v)
      if (s[v]) return v;
    return adj_.size();
  }

  Set component(const Set& within) const {
    Set comp, frontier;
    frontier.set(first(within));
    while (frontier.any()) {
      comp |= frontier;
      Set next;
      for (std::size_t v = 0; v < adj_.size(); ++v)
        if (frontier[v]) next |= adj_[v];
      frontier = next & within & ~comp;
    }
    return comp;
  }

  // Any cover by cliques bounds the independent set size.
  std::size_t clique_cover(Set cand) const {
    std::size_t cliques = 0;
    while (cand.any()) {
      const std::size_t v = first(cand);
      Set clique;
      clique.set(v);
      Set common = adj_[v] & cand;
      while (common.any()) {
        const std::size_t u = first(common);
        clique.set(u);
        common &= adj_[u];
      }
      cand &= ~clique;
      ++cliques;
    }
    return cliques;
  }

  void branch(Set cand, std::size_t taken) {
    // Vertices with at most one neighbor can always be taken.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t v = 0; v < adj_.size(); ++v) {
        if (!cand[v]) continue;
        const Set nb = adj_[v] & cand;
        if (nb.count() <= 1) {
          cand &= ~nb;
          cand.reset(v);
          ++taken;
          changed = true;
        }
      }
    }
    if (cand.none()) {
      best_ = std::max(best_, taken);
      return;
    }
    if (taken + clique_cover(cand) <= best_) return;
    std::size_t pick = 0, deg = 0;
    for (std::size_t v = 0; v < adj_.size(); ++v) {
      if (!cand[v]) continue;
      const std::size_t d = (adj_[v] & cand).count();
      if (d >= deg) {
        deg = d;
        pick = v;
      }
    }
    Set with = cand & ~adj_[pick];
    with.reset(pick);
    branch(with, taken + 1);
    Set without = cand;
    without.reset(pick);
    branch(without, taken);
  }

  std::vector<Set> adj_;
  std::size_t best_ = 0;
};

// N_eps: largest subset with pairwise chain distance >= eps.
std::size_t max_separated(const std::vector<ProductPoint>& pts, double eps) {
  std::vector<Set> adj(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (geometry::sup_dist(pts[i], pts[j]) < eps) {
        adj[i].set(j);
        adj[j].set(i);
      }
  Set all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.set(i);
  return MaxIndependentSet(adj).solve(all);
}

// Quadratic greedy pass; the reference for the hashed implementation.
std::size_t naive_greedy(const std::vector<ProductPoint>& pts, double eps, ChainMetric metric) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool ok = true;
    for (std::size_t j : kept) {
      const double d = metric == ChainMetric::sup ? geometry::sup_dist(pts[i], pts[j])
                                                  : geometry::product_dist(pts[i], pts[j]);
      if (d < eps) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  return kept.size();
}

std::vector<ProductPoint> random_chains(const MapHandle& f, int k, std::size_t n, std::uint64_t seed) {
  SeedStream rng(seed);
  std::vector<ProductPoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(dynamics::chain_point(f, geometry::sample_uniform(f.manifold(), rng), k));
  return out;
}

}  // namespace

TEST_CASE("chain clouds") {
  const auto id = MapHandle::identity(2);
  const auto c = chain_cloud(id, 3, GridSource{4});
  REQUIRE(c.size() == 16);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto p = c.chain(i);
    for (int j = 1; j <= 3; ++j) CHECK(p[static_cast<std::size_t>(j)] == p[0]);
  }
  const auto f = test::doubling();
  const auto g = chain_cloud(f, 1, GridSource{8});
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.chain(i)[1] == f.eval(g.chain(i)[0]));

  const std::vector<ProductPoint> two{dynamics::chain_point(f, Point::torus({0.1, 0.3}), 2),
                                      dynamics::chain_point(f, Point::torus({0.6, 0.9}), 2)};
  const auto from = ChainCloud::from_product_points(two);
  CHECK(from.size() == 2);
  CHECK(geometry::sup_dist(from.chain(1), two[1]) == 0.0);
  CHECK(from.coarse_indices().size() == 1);
  CHECK_THROWS_AS(chain_cloud(test::power(2), 2, GridSource{8}), DomainError);
  CHECK(base_count(ManifoldId::torus(3), GridSource{10}) == 1000);
  CHECK(chain_cloud(f, 2, GridSource{8}).coarse_indices().size() == 16);
}

TEST_CASE("greedy packing on explicit points") {
  const auto id = MapHandle::identity(2);
  const std::vector<ProductPoint> pts{ProductPoint({Point::torus({0, 0})}), ProductPoint({Point::torus({0.5, 0})}),
                                      ProductPoint({Point::torus({0, 0.5})}), ProductPoint({Point::torus({0.5, 0.5})})};
  const auto cloud = ChainCloud::from_product_points(pts);
  const auto r4 = pack_separated(cloud, 0.4);
  CHECK(r4.count == 4);
  // Only the diagonal pair is farther apart than 0.6 (sqrt(0.5) ~ 0.707).
  const auto r6 = pack_separated(cloud, 0.6);
  CHECK(r6.count == 2);
  CHECK(r6.kept == std::vector<std::size_t>{0, 3});
  CHECK(pack_separated(cloud, 0.75).count == 1);
  CHECK(r6.base_samples == 4);
  CHECK_THROWS_AS(pack_separated(cloud, 0.0), DomainError);
}

TEST_CASE("hashed greedy packing equals the quadratic greedy pass") {
  struct Case {
    MapHandle f;
    int k;
    std::vector<double> eps;
  };
  const std::vector<Case> cases{{test::doubling(), 0, {0.01, 0.05, 0.3, 0.6}},
                                {test::doubling(), 3, {0.05, 0.2, 0.45}},
                                {test::toral({{2, 1, 0}, {0, 2, 0}, {0, 0, 1}}), 2, {0.1, 0.3}},
                                {test::power(2), 2, {0.05, 0.3, 1.0, 3.5}},
                                {test::sheared(0.5), 2, {0.1, 0.25}}};
  for (const auto& c : cases) {
    const auto pts = random_chains(c.f, c.k, 1500, 11);
    const auto cloud = ChainCloud::from_product_points(pts);
    for (double eps : c.eps) {
      CHECK(pack_separated(cloud, eps, ChainMetric::sup).count == naive_greedy(pts, eps, ChainMetric::sup));
      CHECK(pack_separated(cloud, eps, ChainMetric::product).count == naive_greedy(pts, eps, ChainMetric::product));
    }
  }
}

TEST_CASE("greedy count lies between N_2eps and N_eps") {
  for (const auto& [f, k] : std::vector<std::pair<MapHandle, int>>{{MapHandle::identity(2), 0}, {test::doubling(), 2}}) {
    const auto pts = random_chains(f, k, 100, 21);
    const auto cloud = ChainCloud::from_product_points(pts);
    for (double eps : {0.15, 0.2, 0.3}) {
      const std::size_t greedy = pack_separated(cloud, eps).count;
      const std::size_t upper = max_separated(pts, eps);
      const std::size_t lower = max_separated(pts, 2.0 * eps);
      CHECK(lower <= greedy);
      CHECK(greedy <= upper);
    }
  }
}

TEST_CASE("packing count is non-increasing in eps") {
  const auto f = test::doubling();
  const auto cloud = chain_cloud(f, 3, GridSource{128});
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double eps : {0.02, 0.03, 0.05, 0.08, 0.1, 0.15, 0.2, 0.3, 0.5}) {
    const std::size_t c = pack_separated(cloud, eps).count;
    CHECK(c <= prev);
    CHECK(c >= 1);
    prev = c;
  }
}

TEST_CASE("identity map has zero entropy") {
  const auto id = MapHandle::identity(2);
  const auto h = h_eps_estimate(id, 0.1, {1, 2, 3, 4}, GridSource{128});
  CHECK(std::abs(h.slope) <= 0.01);
  CHECK_FALSE(h.flagged);
  const auto est = topological_entropy_estimate(id, {0.2, 0.1, 0.05}, {1, 2, 3, 4, 5, 6}, GridSource{128});
  CHECK(std::abs(est.value) <= 0.02);
  // The value comes from the smallest eps whose run is not flagged.
  for (const auto& run : est.per_eps) {
    if (run.eps < est.eps_used) CHECK(run.flagged);
    if (run.eps == est.eps_used) CHECK_FALSE(run.flagged);
  }
  CHECK(entropy_table(est).rows() == 18);
}

TEST_CASE("doubling map slope at eps 0.2") {
  const auto h = h_eps_estimate(test::doubling(), 0.2, {1, 2, 3, 4, 5, 6}, GridSource{512});
  CHECK_FALSE(h.flagged);
  CHECK(h.window.size() >= 3);
  CHECK(std::abs(h.slope - std::log(4.0)) <= 0.15);
  // Window members are exactly the k values with neither flag.
  for (std::size_t i = 0; i < h.ks.size(); ++i) {
    const bool used = std::find(h.window.begin(), h.window.end(), h.ks[i]) != h.window.end();
    CHECK(used == (!h.saturated[i] && !h.unresolved[i]));
  }
}

TEST_CASE("runs the base grid cannot resolve are flagged") {
  // At eps 0.1 with k >= 2 the 512^2 grid stops resolving separated chains.
  const auto h = h_eps_estimate(test::doubling(), 0.1, {2, 3, 4, 5, 6}, GridSource{512});
  CHECK(h.flagged);
  CHECK(h.unresolved.back());
  CHECK_THROWS_AS(topological_entropy_estimate(test::doubling(), {0.2, 0.1, 0.05}, {2, 3, 4}, GridSource{16}),
                  BudgetError);
  CHECK_THROWS_AS(topological_entropy_estimate(test::doubling(), {0.1, 0.2, 0.05}, {1, 2, 3}, GridSource{16}),
                  DomainError);
  CHECK_THROWS_AS(h_eps_estimate(test::doubling(), 0.1, {1, 2}, GridSource{16}), DomainError);
}

TEST_CASE("sphere power map slope at eps 0.2") {
  const auto h = h_eps_estimate(test::power(2), 0.2, {1, 2, 3, 4, 5, 6}, RandomSource{300'000, 1});
  CHECK_FALSE(h.flagged);
  CHECK(std::abs(h.slope - std::log(2.0)) <= 0.15);
}

TEST_CASE("entropy estimates are stable under the shear conjugacy") {
  const std::vector<double> eps{0.2, 0.1, 0.05};
  const std::vector<int> ks{1, 2, 3, 4, 5, 6};
  const auto base = topological_entropy_estimate(test::doubling(), eps, ks, GridSource{512});
  const auto conj = topological_entropy_estimate(test::sheared(0.1), eps, ks, GridSource{512});
  CHECK(std::abs(base.value - std::log(4.0)) <= 0.15);
  CHECK(std::abs(conj.value - std::log(4.0)) <= 0.2);
  CHECK(std::abs(base.value - conj.value) <= 0.1);
}

TEST_CASE("lov against the closed-form chain volumes") {
  const std::vector<int> ks{2, 3, 4, 5, 6};
  const auto lov = lov_estimate(test::doubling(), ks, 1000, SeedStream(1));
  // Oracle: least-squares slope of log sum_{j<=k} 4^j.
  std::vector<double> y;
  for (int k : ks) y.push_back(std::log((std::pow(4.0, k + 1) - 1.0) / 3.0));
  const double mx = 4.0;
  double sxy = 0.0, sxx = 0.0, my = 0.0;
  for (double v : y) my += v / 5.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sxy += (ks[i] - mx) * (y[i] - my);
    sxx += (ks[i] - mx) * (ks[i] - mx);
  }
  CHECK(lov.slope == doctest::Approx(sxy / sxx).epsilon(1e-9));
  CHECK(std::abs(lov.slope - std::log(4.0)) <= 0.05);

  // Identity chains have volume k + 1.
  std::vector<double> yi;
  for (int k : ks) yi.push_back(std::log(k + 1.0));
  double myi = 0.0, sxyi = 0.0;
  for (double v : yi) myi += v / 5.0;
  for (std::size_t i = 0; i < ks.size(); ++i) sxyi += (ks[i] - mx) * (yi[i] - myi);
  CHECK(lov_estimate(MapHandle::identity(2), ks, 100, SeedStream(1)).slope == doctest::Approx(sxyi / sxx).epsilon(1e-9));
  const auto sph = lov_estimate(test::power(2), {1, 2, 3, 4}, 20'000, SeedStream(2));
  CHECK(sph.slope <= std::log(2.0) + 0.1);
}

TEST_CASE("lodn against the closed-form local volumes") {
  const std::vector<int> ks{1, 2, 3, 4};
  const auto l = lodn_estimate(test::doubling(), 0.1, ks, 10, 3000, SeedStream(3));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double exact = std::numbers::pi * 0.01 * (4.0 - std::pow(4.0, -ks[i])) / 3.0;
    CHECK(std::abs(l.density[i] - exact) <= 4.0 * l.density_error[i] + 0.02 * exact);
  }
  CHECK(std::abs(l.slope) <= 0.05);
  // Identity chains are diagonals: local volume (k + 1) pi eps^2.
  const auto lid = lodn_estimate(MapHandle::identity(2), 0.1, ks, 10, 2000, SeedStream(4));
  for (std::size_t i = 0; i < ks.size(); ++i)
    CHECK(lid.density[i] == doctest::Approx((ks[i] + 1) * std::numbers::pi * 0.01).epsilon(0.02));
  const auto lov = lov_estimate(test::doubling(), ks, 1000, SeedStream(1));
  CHECK(l.slope <= lov.slope + 0.1);
  CHECK_THROWS_AS(lodn_estimate(test::doubling(), 0.1, ks, 5, 100, SeedStream(1)), DomainError);
}

TEST_CASE("volume, separation and density audit on the identity") {
  Theorem31Config cfg;
  cfg.base = GridSource{128};
  cfg.volume_samples = 2000;
  cfg.local_samples = 2000;
  const auto rep = audit_theorem_3_1(MapHandle::identity(2), cfg);
  CHECK(rep.pass);
  CHECK(std::abs(rep.lhs) <= 0.02);
  CHECK(rep.details["finite_k_pass"].get<bool>());
  CHECK(rep.details["finite_k"].size() == cfg.eps_schedule.size() * cfg.k_range.size());
  CHECK_FALSE(rep.config_digest.empty());
}
