#include <doctest.h>

#include <cmath>
#include <numbers>

#include "uqr/errors.hpp"
#include "uqr/geometry.hpp"

using namespace uqr;
using namespace uqr::geometry;

namespace {
const ManifoldId T2 = ManifoldId::torus(2);
const ManifoldId S2 = ManifoldId::sphere2();
}  // namespace

TEST_CASE("manifold constants") {
  CHECK(manifold_volume(T2) == 1.0);
  CHECK(manifold_volume(S2) == doctest::Approx(4.0 * std::numbers::pi));
  CHECK(manifold_diameter(ManifoldId::torus(3)) == doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK(manifold_diameter(S2) == doctest::Approx(std::numbers::pi));
  CHECK(ball_volume(T2, 0.1) == doctest::Approx(std::numbers::pi * 0.01));
  CHECK(ball_volume(ManifoldId::torus(3), 0.1) == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 1e-3));
  // Spherical cap area 2 pi (1 - cos r).
  CHECK(ball_volume(S2, 0.5) == doctest::Approx(2.0 * std::numbers::pi * (1.0 - std::cos(0.5))));
  CHECK_THROWS_AS(ManifoldId::torus(1), DomainError);
  CHECK_THROWS_AS(ManifoldId::torus(5), DomainError);
}

TEST_CASE("points are reduced on construction") {
  const Point p = Point::torus({1.25, -0.25});
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(0.75));
  CHECK(wrap01(-1e-18) < 1.0);
  CHECK(wrap01(1.0) == 0.0);
  const Point s = Point::sphere(0.0, 0.0, 2.0);
  CHECK(s[2] == doctest::Approx(1.0));
  CHECK_THROWS_AS(Point::sphere(0.0, 0.0, 0.0), DomainError);
}

TEST_CASE("torus and sphere distances") {
  CHECK(dist(Point::torus({0.1, 0.1}), Point::torus({0.9, 0.9})) == doctest::Approx(std::sqrt(0.08)));
  CHECK(dist(Point::torus({0.0, 0.0}), Point::torus({0.5, 0.5})) == doctest::Approx(std::sqrt(0.5)));
  CHECK(dist(Point::sphere(1, 0, 0), Point::sphere(0, 1, 0)) == doctest::Approx(std::numbers::pi / 2));
  CHECK(dist(Point::sphere(0, 0, 1), Point::sphere(0, 0, -1)) == doctest::Approx(std::numbers::pi));
  CHECK(dist(Point::sphere(0, 0, 1), Point::sphere(0, 0, 1)) == 0.0);
  CHECK_THROWS_AS(dist(Point::torus({0.1, 0.1}), Point::sphere(1, 0, 0)), DomainError);
}

TEST_CASE("metric axioms hold on random samples") {
  SeedStream rng(5);
  for (const ManifoldId& m : {T2, ManifoldId::torus(3), S2}) {
    for (int i = 0; i < 500; ++i) {
      const Point a = sample_uniform(m, rng), b = sample_uniform(m, rng), c = sample_uniform(m, rng);
      CHECK(dist(a, b) == doctest::Approx(dist(b, a)));
      CHECK(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-12);
      CHECK(dist(a, b) <= manifold_diameter(m) + 1e-12);
    }
  }
}

TEST_CASE("sup and product chain metrics are equivalent") {
  SeedStream rng(6);
  for (int i = 0; i < 200; ++i) {
    std::vector<Point> xs, ys;
    for (int j = 0; j < 4; ++j) {
      xs.push_back(sample_uniform(S2, rng));
      ys.push_back(sample_uniform(S2, rng));
    }
    const ProductPoint x(xs), y(ys);
    const double s = sup_dist(x, y), p = product_dist(x, y);
    CHECK(s <= p + 1e-12);
    CHECK(p <= 2.0 * s + 1e-12);  // sqrt(k + 1) with k = 3
  }
  const ProductPoint a({Point::torus({0, 0}), Point::torus({0, 0})});
  const ProductPoint b({Point::torus({0, 0})});
  CHECK_THROWS_AS(sup_dist(a, b), DomainError);
}

TEST_CASE("ball sampling stays inside and matches the ball volume") {
  SeedStream rng(8);
  for (const ManifoldId& m : {T2, S2}) {
    const Point c = sample_uniform(m, rng);
    for (int i = 0; i < 2000; ++i) CHECK(dist(sample_ball(c, 0.2, rng), c) <= 0.2 + 1e-12);
  }
  // Fraction of uniform samples in a ball estimates its normalized volume.
  for (const ManifoldId& m : {T2, S2}) {
    const Point c = sample_uniform(m, rng);
    int in = 0;
    const int n = 200'000;
    for (int i = 0; i < n; ++i) in += dist(sample_uniform(m, rng), c) < 0.3;
    const double expected = ball_volume(m, 0.3) / manifold_volume(m);
    CHECK(static_cast<double>(in) / n == doctest::Approx(expected).epsilon(0.03));
  }
}

TEST_CASE("translation on the torus") {
  const Point x = Point::torus({0.9, 0.2});
  const std::array<double, 2> t{0.2, -0.3};
  const Point y = translate(x, t);
  CHECK(y[0] == doctest::Approx(0.1));
  CHECK(y[1] == doctest::Approx(0.9));
}
