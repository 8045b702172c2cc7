#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "uqr/parallel.hpp"
#include "uqr/report.hpp"
#include "uqr/rng.hpp"

using namespace uqr;

TEST_CASE("seed streams are reproducible and splits are independent of position") {
  SeedStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  SeedStream c(42);
  const SeedStream child_before = c.split(7);
  for (int i = 0; i < 50; ++i) c();
  const SeedStream child_after = c.split(7);
  SeedStream x = child_before, y = child_after;
  for (int i = 0; i < 20; ++i) CHECK(x() == y());

  SeedStream d(42);
  SeedStream e = d.split(1), f = d.split(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += e() == f();
  CHECK(equal == 0);
}

TEST_CASE("uniform and normal variates have the right low moments") {
  SeedStream s(3);
  const int n = 200'000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = s.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hits(10'000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 10'000);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) { if (i == 57) throw std::runtime_error("boom"); }),
                  std::runtime_error);
}

TEST_CASE("blocked sums do not depend on the worker count") {
  auto fn = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e-3 + 1.0 / (1.0 + i); };
  set_thread_count(1);
  const double one = blocked_sum(100'000, fn);
  const auto vec_one = blocked_sum_vec(50'000, 3, [](std::size_t i, std::span<double> acc) {
    acc[0] += 1.0;
    acc[1] += std::cos(static_cast<double>(i));
    acc[2] += 1.0 / (1.0 + i);
  });
  set_thread_count(4);
  const double four = blocked_sum(100'000, fn);
  const auto vec_four = blocked_sum_vec(50'000, 3, [](std::size_t i, std::span<double> acc) {
    acc[0] += 1.0;
    acc[1] += std::cos(static_cast<double>(i));
    acc[2] += 1.0 / (1.0 + i);
  });
  set_thread_count(0);
  CHECK(one == four);
  CHECK(vec_one == vec_four);
  CHECK(vec_one[0] == 50'000.0);
}

TEST_CASE("pairwise sum is exact on representable data") {
  std::vector<double> v(1000, 0.125);
  CHECK(pairwise_sum(v) == 125.0);
  CHECK(pairwise_sum(std::span<const double>()) == 0.0);
}

TEST_CASE("csv tables quote fields and use 17 significant digits") {
  CsvTable t({"name", "value", "count"});
  t.add_row({std::string("plain"), 0.1, 3LL});
  t.add_row({std::string("needs,\"quote\""), 1.0 / 3.0, -1LL});
  const std::string s = t.str();
  CHECK(s.find("name,value,count\r\n") == 0);
  CHECK(s.find("plain,0.10000000000000001,3\r\n") != std::string::npos);
  CHECK(s.find("\"needs,\"\"quote\"\"\",0.33333333333333331,-1\r\n") != std::string::npos);
  CHECK_THROWS(t.add_row({1.0}));
}

TEST_CASE("audit reports serialize non-finite numbers and digests are stable") {
  AuditReport r;
  r.name = "x";
  r.lhs = NAN;
  r.rhs = INFINITY;
  r.tolerance = 0.1;
  const auto j = to_json(r);
  CHECK(j["lhs"] == "nan");
  CHECK(j["rhs"] == "inf");

  r.lhs = 1.0;
  r.rhs = 0.95;
  r.decide_inequality();
  CHECK(r.pass);
  r.rhs = 0.8;
  r.decide_inequality();
  CHECK_FALSE(r.pass);

  const nlohmann::json a = {{"b", 1}, {"a", 2}};
  const nlohmann::json b = {{"a", 2}, {"b", 1}};
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a) != config_digest({{"a", 3}, {"b", 1}}));
  CHECK(config_digest(a).size() == 16);
}
