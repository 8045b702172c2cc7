#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "uqr/errors.hpp"

using namespace uqr;
using namespace uqr::dynamics;
using geometry::ManifoldId;
using geometry::Point;

namespace {

// Laplace expansion; independent of the library's elimination.
long long det_oracle(const IntMatrix& a) {
  const auto n = a.rows();
  if (n == 1) return a(0, 0);
  long long s = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    IntMatrix m(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r)
      for (Eigen::Index c = 0, cc = 0; c < n; ++c)
        if (c != j) m(r - 1, cc++) = a(r, c);
    s += (j % 2 == 0 ? 1 : -1) * a(0, j) * det_oracle(m);
  }
  return s;
}

// Geodesic finite-difference stretch of f at x along a random tangent direction.
double fd_stretch(const MapHandle& f, const Point& x, SeedStream& rng, double h = 1e-6) {
  const Point y = geometry::sample_ball(x, h, rng);
  return geometry::dist(f.eval(x), f.eval(y)) / geometry::dist(x, y);
}

}  // namespace

TEST_CASE("integer determinant agrees with cofactor expansion") {
  SeedStream rng(1);
  for (int n = 2; n <= 4; ++n) {
    for (int t = 0; t < 50; ++t) {
      IntMatrix a(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = static_cast<long long>(rng.uniform(-4, 5));
      CHECK(integer_determinant(a) == det_oracle(a));
    }
  }
}

TEST_CASE("singular matrices are rejected") {
  IntMatrix a(2, 2);
  a << 1, 2, 2, 4;
  CHECK_THROWS_WITH_AS(ToralEndo{a}, "degree undefined: singular matrix", DomainError);
}

TEST_CASE("coset representatives form a complete residue system") {
  for (const auto& f : {test::toral({{2, 0}, {0, 3}}), test::toral({{2, 1}, {0, 2}}), test::toral({{1, 2}, {3, -1}}),
                        test::toral({{2, 0, 0}, {0, 1, 1}, {0, -1, 2}})}) {
    const auto& t = std::get<ToralEndo>(f.family());
    const auto& reps = t.coset_representatives();
    const long long det = std::abs(integer_determinant(t.matrix()));
    CHECK(static_cast<long long>(reps.size()) == det);
    CHECK(f.degree() == det);
    // Distinct classes: A^{-1}(v - w) is never integral.
    const Matrix inv = t.matrix().cast<double>().inverse();
    const int n = static_cast<int>(t.matrix().rows());
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = i + 1; j < reps.size(); ++j) {
        Eigen::VectorXd d(n);
        for (int c = 0; c < n; ++c) d(c) = static_cast<double>(reps[i][c] - reps[j][c]);
        const Eigen::VectorXd q = inv * d;
        bool integral = true;
        for (int c = 0; c < n; ++c) integral = integral && std::abs(q(c) - std::round(q(c))) < 1e-9;
        CHECK_FALSE(integral);
      }
  }
}

TEST_CASE("index-weighted preimage counts equal the degree") {
  SeedStream rng(2);
  for (const auto& f : {test::doubling(), test::toral({{2, 0}, {0, 3}}), test::toral({{2, 1}, {0, 2}}),
                        test::sheared(0.3), test::sheared(0.5, ShearProfile::bump), test::power(2), test::power(3)}) {
    for (int t = 0; t < 100; ++t) {
      const Point y = geometry::sample_uniform(f.manifold(), rng);
      const auto pre = f.preimages(y);
      int total = 0;
      for (const auto& p : pre) {
        total += p.index;
        CHECK(geometry::dist(f.eval(p.point), y) < 1e-9);
      }
      CHECK(total == f.degree());
    }
  }
}

TEST_CASE("power maps at the poles") {
  const auto f = test::power(2);
  const Point north = Point::sphere(0, 0, 1), south = Point::sphere(0, 0, -1);
  CHECK(f.local_index(north) == 2);
  CHECK(f.local_index(south) == 2);
  CHECK(f.local_index(Point::sphere(1, 0, 0)) == 1);
  const auto pre = f.preimages(north);
  REQUIRE(pre.size() == 1);
  CHECK(pre[0].index == 2);
  CHECK(geometry::dist(pre[0].point, north) == 0.0);
  CHECK(f.branch_points().size() == 2);
  CHECK(f.jacobian(north) == 0.0);
  CHECK_FALSE(f.pointwise_distortion(north).has_value());
}

TEST_CASE("power maps agree with complex arithmetic in the north chart") {
  SeedStream rng(3);
  for (int d : {2, 3, 5}) {
    const auto f = test::power(d);
    for (int t = 0; t < 200; ++t) {
      const std::complex<double> w(rng.uniform(-2, 2), rng.uniform(-2, 2));
      const Point x = sphere_from_w(w);
      CHECK(geometry::dist(f.eval(x), sphere_from_w(std::pow(w, d))) < 1e-9);
    }
  }
  // Chart round trip.
  for (int t = 0; t < 200; ++t) {
    const Point x = geometry::sample_uniform(ManifoldId::sphere2(), rng);
    const ChartValue c = to_chart(x);
    CHECK(std::abs(c.value) <= 1.0 + 1e-12);
    CHECK(geometry::dist(from_chart(c), x) < 1e-12);
  }
}

TEST_CASE("power map differentials are conformal with the metric scale factor") {
  SeedStream rng(4);
  const auto f = test::power(2);
  for (int t = 0; t < 200; ++t) {
    const Point x = geometry::sample_uniform(ManifoldId::sphere2(), rng);
    const Matrix d = f.differential(x);
    const double s_max = operator_norm(d), s_min = min_singular_value(d);
    CHECK(s_max == doctest::Approx(s_min).epsilon(1e-9));
    // |f'| (1 + |w|^2) / (1 + |w|^4) with w in the active chart.
    const double r = std::abs(to_chart(x).value);
    const double scale = 2.0 * r * (1.0 + r * r) / (1.0 + r * r * r * r);
    CHECK(s_max == doctest::Approx(scale).epsilon(1e-9));
    CHECK(fd_stretch(f, x, rng) == doctest::Approx(scale).epsilon(1e-4));
  }
}

TEST_CASE("toral and sheared differentials match finite differences") {
  SeedStream rng(5);
  for (const auto& f : {test::toral({{2, 1}, {0, 2}}), test::sheared(0.4), test::sheared(0.7, ShearProfile::bump)}) {
    for (int t = 0; t < 100; ++t) {
      const Point x = geometry::sample_uniform(f.manifold(), rng);
      const Matrix d = f.differential(x);
      const double h = 1e-6;
      for (int c = 0; c < 2; ++c) {
        std::array<double, 2> e{0.0, 0.0};
        e[static_cast<std::size_t>(c)] = h;
        const Point xp = geometry::translate(x, e);
        const Point fx = f.eval(x), fxp = f.eval(xp);
        for (int r = 0; r < 2; ++r) {
          double diff = fxp[r] - fx[r];
          diff -= std::round(diff);
          CHECK(diff / h == doctest::Approx(d(r, c)).epsilon(1e-4).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("sheared maps are conjugate to their base") {
  SeedStream rng(6);
  const auto handle = test::sheared(0.6);
  const auto& f = std::get<ShearedEndo>(handle.family());
  for (int t = 0; t < 200; ++t) {
    const Point x = geometry::sample_uniform(f.manifold(), rng);
    CHECK(geometry::dist(f.conjugacy(f.conjugacy_inverse(x)), x) < 1e-12);
    CHECK(geometry::dist(f.conjugacy_inverse(f.conjugacy(x)), x) < 1e-12);
    CHECK(f.conjugacy_differential(x).determinant() == doctest::Approx(1.0));
    CHECK(geometry::dist(f.eval(f.conjugacy(x)), f.conjugacy(f.base().eval(x))) < 1e-12);
  }
  // K_h = ((s + sqrt(s^2 + 4)) / 2)^n for a unit-slope shear.
  const double kh = std::pow((0.6 + std::sqrt(0.36 + 4.0)) / 2.0, 2.0);
  CHECK(f.conjugacy_distortion() == doctest::Approx(kh));
  CHECK_THROWS_AS(ShearedEndo(f.base(), 1.0, ShearProfile::sine), DomainError);
}

TEST_CASE("iterate distortion") {
  // Conformal linear maps are 1-quasiregular.
  CHECK(iterate_distortion(test::doubling(), 3, 100, SeedStream(1)).value == doctest::Approx(1.0));
  CHECK(iterate_distortion(test::power(2), 3, 100, SeedStream(1)).value == doctest::Approx(1.0));
  // Jordan block: ||A||^2 / det A with ||A||^2 the top eigenvalue of A^T A = [[4,2],[2,5]].
  const double top = (9.0 + std::sqrt(17.0)) / 2.0;
  const auto jordan = test::toral({{2, 1}, {0, 2}});
  CHECK(iterate_distortion(jordan, 1, 10, SeedStream(1)).value == doctest::Approx(top / 4.0));
  CHECK(jordan.distortion_bound(1) == doctest::Approx(top / 4.0));
  // Sampled values never exceed the analytic bound.
  const auto s = test::sheared(0.3);
  for (int k = 1; k <= 4; ++k)
    CHECK(iterate_distortion(s, k, 500, SeedStream(2)).value <= s.distortion_bound(k) * (1.0 + 1e-9));
}

TEST_CASE("chain points and orbit differentials") {
  const auto f = test::doubling();
  const Point x = Point::torus({0.3, 0.7});
  const auto c = chain_point(f, x, 3);
  REQUIRE(c.size() == 4);
  CHECK(c[1][0] == doctest::Approx(0.6));
  CHECK(c[3][0] == doctest::Approx(0.4));  // 2.4 mod 1
  const auto ds = orbit_differentials(f, x, 3);
  CHECK(ds[0].isIdentity());
  CHECK(ds[3](0, 0) == doctest::Approx(8.0));

  const auto id = MapHandle::identity(2);
  CHECK(id.degree() == 1);
  const auto ci = chain_point(id, x, 2);
  CHECK(ci[2] == x);
}
