#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "uqr/errors.hpp"
#include "uqr/graph_geometry.hpp"

using namespace uqr;
using namespace uqr::graph;
using geometry::ManifoldId;
using geometry::Point;

namespace {
double geometric_sum(double q, int k) {
  double s = 0.0;
  for (int j = 0; j <= k; ++j) s += std::pow(q, j);
  return s;
}
}  // namespace

TEST_CASE("Gram Jacobian of stacked differentials") {
  // (I, 2I, 4I): det(1 + 4 + 16) I = 21^2, sqrt = 21.
  Matrix i2 = Matrix::Identity(2, 2);
  CHECK(gram_jacobian({i2, 2.0 * i2, 4.0 * i2}) == doctest::Approx(21.0));
  // Single block: |det|.
  Matrix a(2, 2);
  a << 2, 1, 0, 3;
  CHECK(gram_jacobian({a}) == doctest::Approx(6.0));
  // Cauchy-Binet oracle for two 2x2 blocks: sum of squared 2x2 minors of the 4x2 stack.
  Matrix b(2, 2);
  b << 1, -1, 2, 0.5;
  Eigen::Matrix<double, 4, 2> s;
  s << a, b;
  double minors = 0.0;
  for (int r1 = 0; r1 < 4; ++r1)
    for (int r2 = r1 + 1; r2 < 4; ++r2) {
      const double m = s(r1, 0) * s(r2, 1) - s(r1, 1) * s(r2, 0);
      minors += m * m;
    }
  CHECK(gram_jacobian({a, b}) == doctest::Approx(std::sqrt(minors)));
}

TEST_CASE("chain volumes against closed forms") {
  const auto f = test::doubling();
  for (int k = 0; k <= 6; ++k) {
    const auto v = chain_volume(f, k, 1000, SeedStream(1));
    CHECK(std::abs(v.value - geometric_sum(4.0, k)) <= 1e-9 * geometric_sum(4.0, k));
    CHECK(v.std_error <= 1e-9 * v.value);
  }
  const auto id = chain_volume(MapHandle::identity(2), 3, 100, SeedStream(1));
  CHECK(id.value == doctest::Approx(4.0));  // sqrt(det 4 I)
  // w^2 on the sphere: sum_j |(f^j)'|^2 integrates to 4 pi 2^j, so the volume
  // of the (conformal) chain is 4 pi (2^{k+1} - 1).
  for (int k = 1; k <= 3; ++k) {
    const auto v = chain_volume(test::power(2), k, 20'000, SeedStream(2));
    const double exact = 4.0 * std::numbers::pi * (std::pow(2.0, k + 1) - 1.0);
    CHECK(std::abs(v.value - exact) <= 4.0 * v.std_error + 1e-3 * exact);
    CHECK_FALSE(v.flagged);
  }
}

TEST_CASE("local chain volumes against closed forms") {
  const auto f = test::doubling();
  SeedStream rng(3);
  for (int k : {1, 3, 5}) {
    const Point c = geometry::sample_uniform(f.manifold(), rng);
    const double eps = 0.1;
    // Sup-metric polydisc pulls back to a disc of radius eps 2^-k.
    const double exact = std::numbers::pi * eps * eps * (4.0 - std::pow(4.0, -k)) / 3.0;
    const auto v = local_volume(f, k, c, eps, geometry::ChainMetric::sup, 4000, SeedStream(10 + k));
    CHECK(std::abs(v.value - exact) <= 4.0 * v.std_error + 1e-3 * exact);
  }
  // Identity with the product metric: the diagonal ball of radius r is a disc of radius r/sqrt(k+1)
  // with Jacobian (k+1); its volume is pi r^2.
  const auto id = MapHandle::identity(2);
  const auto v = local_volume(id, 3, Point::torus({0.2, 0.8}), 0.1, geometry::ChainMetric::product, 4000, SeedStream(4));
  CHECK(std::abs(v.value - std::numbers::pi * 0.01) <= 4.0 * v.std_error + 1e-3);
  CHECK_THROWS_AS(local_volume(id, 3, Point::torus({0.2, 0.8}), 0.0, geometry::ChainMetric::sup, 10, SeedStream(1)),
                  DomainError);
}

TEST_CASE("Ahlfors scans have slope n") {
  std::vector<Point> centers{Point::torus({0.1, 0.2}), Point::torus({0.7, 0.4})};
  AhlforsOptions opts;
  opts.samples = 2000;
  const auto scan = ahlfors_scan(test::doubling(), 2, centers, {0.3, 0.1, 0.03, 0.01}, opts);
  CHECK(scan.pass);
  CHECK(std::abs(scan.slope - 2.0) <= 0.2);
  CHECK(scan.spread <= 4.0);
  CHECK(scan.table.size() == 8);
}

TEST_CASE("pointwise Jacobian bound") {
  // (2I, 4I): |J_g| = 4 + 16 = 20 and the bound is 2 * 1 * 1 * (4 + 16) = 40.
  const auto f = test::doubling();
  const auto rep = check_pointwise_bound({{f, 1}, {f, 2}}, 100, SeedStream(5));
  CHECK(rep.pass);
  CHECK(rep.lhs == doctest::Approx(20.0));
  CHECK(rep.rhs == doctest::Approx(40.0));
  for (const auto& comps : std::vector<std::vector<ComponentMap>>{
           {{test::sheared(0.5), 1}, {test::sheared(0.5), 2}, {test::sheared(0.5), 3}},
           {{test::power(2), 1}, {test::power(2), 2}},
           {{test::toral({{2, 1}, {0, 2}}), 1}, {test::toral({{2, 1}, {0, 2}}), 3}}}) {
    const auto r = check_pointwise_bound(comps, 2000, SeedStream(6));
    CHECK(r.pass);
  }
  // A deliberately too small K must produce violations.
  const auto bad = check_pointwise_bound({{test::toral({{4, 0}, {0, 1}}), 1}, {test::doubling(), 1}}, 100,
                                         SeedStream(7), 0.1);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("n-Jacobian matches the Gram determinant of the orbit differentials") {
  const auto f = test::sheared(0.4);
  SeedStream rng(8);
  for (int t = 0; t < 50; ++t) {
    const Point x = geometry::sample_uniform(f.manifold(), rng);
    CHECK(n_jacobian(f, 3, x) == doctest::Approx(gram_jacobian(dynamics::orbit_differentials(f, x, 3))));
  }
}
