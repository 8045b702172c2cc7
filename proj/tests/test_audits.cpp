#include <doctest.h>

#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "uqr/audits.hpp"
#include "uqr/errors.hpp"

using namespace uqr;
using namespace uqr::audits;

namespace {

std::vector<double> sampled(std::size_t points, double a, const std::function<double(double)>& g) {
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) out[i] = g(a * static_cast<double>(i) / static_cast<double>(points - 1));
  return out;
}

std::unique_ptr<entropy::EntropyEstimate> fixed_estimate(double value) {
  auto e = std::make_unique<entropy::EntropyEstimate>();
  e->value = value;
  e->eps_used = 0.1;
  return e;
}

}  // namespace

TEST_CASE("power functions meet the hypothesis with equality") {
  for (int n : {2, 3}) {
    const auto g = sampled(200, 1.0, [n](double t) { return std::pow(t, n); });
    const auto r = bihari_check(g, 1.0, n, n);
    CHECK(r.pass);
    CHECK(r.details["hypothesis_points"].get<std::size_t>() == 200);
    CHECK(r.details["violations"].get<std::size_t>() == 0);

    const auto g2 = sampled(200, 1.0, [n](double t) { return 2.0 * std::pow(t, n); });
    const auto r2 = bihari_check(g2, 1.0, n, n);
    CHECK(r2.pass);
    CHECK(r2.details["hypothesis_points"].get<std::size_t>() == 200);
  }
}

TEST_CASE("functions below the hypothesis are checked vacuously") {
  // Half of t^2 cannot dominate 2 int_0^t (t^2 / 2)^{1/2}.
  const auto g = sampled(200, 1.0, [](double t) { return 0.5 * t * t; });
  const auto r = bihari_check(g, 1.0, 2.0, 2);
  CHECK(r.pass);
  CHECK(r.details["hypothesis_points"].get<std::size_t>() <= 1);
}

TEST_CASE("hypothesis must hold on the whole prefix") {
  // Large on [0, 0.5], small afterwards: the conclusion fails late but the
  // hypothesis breaks first, so no violation may be reported.
  const auto g = sampled(400, 1.0, [](double t) { return t <= 0.5 ? 10.0 * t * t : 0.01 * t * t + 1e-6; });
  const auto r = bihari_check(g, 1.0, 2.0, 2);
  CHECK(r.pass);
  CHECK(r.details["hypothesis_points"].get<std::size_t>() < 400);
}

TEST_CASE("bihari check rejects bad input") {
  CHECK_THROWS_AS(bihari_check(std::vector<double>{-1.0, 1.0, 2.0}, 1.0, 1.0, 2), DomainError);
  CHECK_THROWS_AS(bihari_check(std::vector<double>{0.0, 0.0, 2.0}, 1.0, 1.0, 2), DomainError);
  CHECK_THROWS_AS(bihari_check(std::vector<double>{0.0, 1.0, 2.0}, 1.0, 1.0, 0), DomainError);
  CHECK_THROWS_AS(bihari_check(std::vector<double>{0.0, 1.0}, 1.0, 1.0, 2), DomainError);
  CHECK_THROWS_AS(bihari_check(std::vector<double>{0.0, 1.0, 2.0}, -1.0, 1.0, 2), DomainError);
}

TEST_CASE("generated instances satisfy the hypothesis and the conclusion") {
  SeedStream rng(17);
  for (int n : {2, 3}) {
    for (int i = 0; i < 20; ++i) {
      const auto inst = bihari_generate(n, 150, rng);
      CHECK(inst.a >= 0.5);
      CHECK(inst.a <= 2.0);
      CHECK(inst.C >= 0.5);
      CHECK(inst.C <= 4.0);
      const auto r = bihari_check(inst.g, inst.a, inst.C, n);
      CHECK(r.pass);
      CHECK(r.details["hypothesis_points"].get<std::size_t>() == 150);
    }
  }
  const auto st = bihari_selftest(100, 1);
  CHECK(st.instances == 200);
  CHECK(st.failures == 0);
  CHECK(st.checked_points == 200 * 200);
}

TEST_CASE("distortion bound audit") {
  EntropyConfig cfg;
  cfg.distortion_samples = 500;
  const auto ok = audit_theorem_7_1(test::doubling(), cfg, fixed_estimate(std::log(4.0) + 0.05).get());
  CHECK(ok.pass);
  CHECK(ok.rhs == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(ok.details["K"].get<double>() == doctest::Approx(1.0));
  const auto bad = audit_theorem_7_1(test::doubling(), cfg, fixed_estimate(2.0).get());
  CHECK_FALSE(bad.pass);

  // The shear makes K(f) > 1 but K(f^k) stays bounded, so the slope is small.
  const auto sh = audit_theorem_7_1(test::sheared(0.1), cfg, fixed_estimate(std::log(4.0)).get());
  CHECK(sh.pass);
  CHECK(std::abs(sh.details["distortion_slope"].get<double>()) <= 0.02);
  CHECK(sh.details["coarse_rhs"].get<double>() > std::log(4.0));

  cfg.base = entropy::GridSource{96};
  const auto id = audit_theorem_7_1(MapHandle::identity(2), cfg);
  CHECK(id.pass);
  CHECK(std::abs(id.lhs) <= 0.02);
  CHECK_FALSE(id.config_digest.empty());
  CHECK(audit_theorem_7_1(MapHandle::identity(2), cfg).config_digest == id.config_digest);
}

TEST_CASE("entropy equality audit on the doubling map") {
  MainConfig cfg;
  cfg.entropy.distortion_samples = 500;
  cfg.balanced_k = 2;
  cfg.balanced_samples = 500;
  cfg.ks_atoms = 200'000;
  cfg.ks_depth = 3;
  cfg.ks_k = 3;
  const auto ok = audit_main_theorem(test::doubling(), cfg, fixed_estimate(std::log(4.0) - 0.05).get());
  CHECK(ok.pass);
  CHECK(ok.tolerance == 0.15);
  CHECK(ok.details["measure_bound"]["bound"].get<double>() == std::log(4.0));
  CHECK(ok.details["ks_pass"].get<bool>());

  const auto far = audit_main_theorem(test::doubling(), cfg, fixed_estimate(std::log(4.0) + 0.3).get());
  CHECK_FALSE(far.pass);
  CHECK_FALSE(far.details["entropy_pass"].get<bool>());

  const auto skew = audit_main_theorem(test::toral({{2, 1}, {0, 3}}), cfg, fixed_estimate(std::log(6.0)).get());
  CHECK(skew.tolerance == 0.2);
}

TEST_CASE("entropy equality audit on the sphere reports the upper bound only") {
  MainConfig cfg;
  cfg.entropy.distortion_samples = 500;
  const auto r = audit_main_theorem(test::power(2), cfg, fixed_estimate(std::log(2.0)).get());
  CHECK(r.pass);
  CHECK(r.details["verdict"].get<std::string>().find("upper bound verified") == 0);
  CHECK_FALSE(r.details.contains("ks_pass"));
}
