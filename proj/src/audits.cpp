#include "uqr/audits.hpp"

#include <algorithm>
#include <cmath>

#include "uqr/entropy_measure.hpp"
#include "uqr/errors.hpp"
#include "uqr/measures.hpp"

namespace uqr::audits {

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

nlohmann::json base_json(const entropy::BaseSource& b) {
  if (const auto* g = std::get_if<entropy::GridSource>(&b)) return {{"grid", g->resolution}};
  const auto& r = std::get<entropy::RandomSource>(b);
  return {{"random_samples", r.count}, {"random_seed", r.seed}};
}

nlohmann::json entropy_config_json(const MapHandle& f, const EntropyConfig& c) {
  return {{"map", f.describe()},
          {"eps_schedule", c.eps_schedule},
          {"k_range", c.k_range},
          {"base", base_json(c.base)},
          {"distortion_ks", c.distortion_ks},
          {"distortion_samples", c.distortion_samples},
          {"tolerance", c.tolerance},
          {"seed", c.seed}};
}

// Largest root of g = A + B g^{(n-1)/n} (A >= 0, B > 0), solved in u = g^{1/n}.
double implicit_trapezoid_step(double A, double B, int n) {
  const double a = std::pow(A, 1.0 / n);
  double lo = B, hi = B + a;
  auto F = [&](double u) { return std::pow(u, n) - B * std::pow(u, n - 1) - A; };
  if (F(hi) < 0.0) hi = B + a + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::pow(hi, n);
}

}  // namespace

// -----------------------------------------------------------------------------
// Bihari-LaSalle
// -----------------------------------------------------------------------------

AuditReport bihari_check(std::span<const double> g, double a, double C, int n) {
  if (g.size() < 3) throw DomainError("bihari_check: need at least 3 samples");
  if (!(a > 0.0) || !(C > 0.0) || n < 1) throw DomainError("bihari_check: need a > 0, C > 0, n >= 1");
  if (!(g[0] >= 0.0)) throw DomainError("bihari_check: g(0) must be nonnegative");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > 0.0) || !std::isfinite(g[i])) throw DomainError("bihari_check: g must be positive on (0, a]");

  const std::size_t N = g.size();
  const double h = a / static_cast<double>(N - 1);
  const double p = static_cast<double>(n - 1) / n;
  std::vector<double> phi(N);
  for (std::size_t i = 0; i < N; ++i) phi[i] = std::pow(g[i], p);
  double m2 = 0.0;
  for (std::size_t i = 1; i + 1 < N; ++i) m2 = std::max(m2, std::abs(phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h));

  AuditReport rep;
  rep.name = "bihari-lasalle";
  rep.tolerance = 1e-9;
  double integral = 0.0;
  bool prefix = true;
  std::size_t hyp_points = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  nlohmann::json bad = nlohmann::json::array();
  const double cn = std::pow(C / n, n);
  for (std::size_t i = 0; i < N; ++i) {
    if (i > 0) integral += 0.5 * h * (phi[i - 1] + phi[i]);
    const double t = static_cast<double>(i) * h;
    const double slack = C * t * h * h * m2 / 12.0;
    // Equality cases must survive rounding in the running sum.
    prefix = prefix && g[i] >= C * integral * (1.0 - 1e-12) - slack;
    if (!prefix) break;
    ++hyp_points;
    const double target = cn * std::pow(t, n);
    const double deficit = target - g[i];
    const double allowed = 1e-9 * target + slack;
    worst = std::max(worst, deficit - allowed);
    if (deficit > allowed) {
      ++violations;
      if (bad.size() < 20) bad.push_back({{"t", t}, {"g", g[i]}, {"bound", target}, {"slack", slack}});
    }
  }
  // lhs: worst conclusion deficit beyond the allowed slack; pass iff <= 0.
  rep.lhs = hyp_points > 0 ? worst : 0.0;
  rep.rhs = 0.0;
  rep.tolerance = 0.0;
  rep.pass = violations == 0;
  rep.config_digest = config_digest({{"a", a}, {"C", C}, {"n", n}, {"samples", N}});
  rep.details = {{"hypothesis_points", hyp_points},
                 {"grid_points", N},
                 {"violations", violations},
                 {"violating_points", bad},
                 {"phi_second_derivative_bound", m2},
                 {"relative_slack", 1e-9}};
  return rep;
}

BihariInstance bihari_generate(int n, std::size_t points, SeedStream& rng) {
  if (n < 2) throw DomainError("bihari_generate: n must be at least 2");
  if (points < 3) throw DomainError("bihari_generate: need at least 3 points");
  BihariInstance inst;
  inst.n = n;
  inst.a = rng.uniform(0.5, 2.0);
  inst.C = rng.uniform(0.5, 4.0);
  const double amp = rng.uniform(0.0, 2.0);
  const double spike_rate = rng.uniform(0.0, 0.5);
  const double h = inst.a / static_cast<double>(points - 1);
  const double p = static_cast<double>(n - 1) / n;
  inst.g.assign(points, 0.0);
  double integral = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) * h;
    const double noise = rng.uniform() < spike_rate ? amp * rng.uniform() * (1.0 + std::pow(t, n)) : 0.0;
    if (i == 0) {
      inst.g[0] = noise;
      continue;
    }
    const double phi_prev = std::pow(inst.g[i - 1], p);
    const double A = inst.C * (integral + 0.5 * h * phi_prev) + noise;
    inst.g[i] = implicit_trapezoid_step(A, 0.5 * inst.C * h, n);
    integral += 0.5 * h * (phi_prev + std::pow(inst.g[i], p));
  }
  return inst;
}

BihariSelftest bihari_selftest(std::size_t instances, std::uint64_t seed, std::size_t points) {
  BihariSelftest st;
  const SeedStream root(seed);
  for (int n : {2, 3}) {
    for (std::size_t i = 0; i < instances; ++i) {
      SeedStream s = root.split(static_cast<std::uint64_t>(n) * 1'000'003u + i);
      const BihariInstance inst = bihari_generate(n, points, s);
      AuditReport r = bihari_check(inst.g, inst.a, inst.C, inst.n);
      r.details["instance"] = i;
      r.details["n"] = n;
      st.checked_points += r.details["hypothesis_points"].get<std::size_t>();
      if (!r.pass) ++st.failures;
      ++st.instances;
      st.reports.push_back(std::move(r));
    }
  }
  return st;
}

// -----------------------------------------------------------------------------
// Entropy audits
// -----------------------------------------------------------------------------

entropy::BaseSource default_base(const geometry::ManifoldId& m, std::uint64_t seed) {
  if (m.is_sphere()) return entropy::RandomSource{300'000, seed};
  if (m.dimension() == 2) return entropy::GridSource{512};
  if (m.dimension() == 3) return entropy::GridSource{64};
  return entropy::GridSource{24};
}

AuditReport audit_theorem_7_1(const MapHandle& f, const EntropyConfig& config,
                              const entropy::EntropyEstimate* precomputed) {
  AuditReport rep;
  rep.name = "entropy upper bound via distortion";
  rep.tolerance = config.tolerance;
  rep.config_digest = config_digest(entropy_config_json(f, config));

  entropy::EntropyEstimate h;
  if (precomputed) h = *precomputed;
  else h = entropy::topological_entropy_estimate(f, config.eps_schedule, config.k_range, config.base);

  if (config.distortion_ks.size() < 2) throw DomainError("audit_theorem_7_1: need at least 2 distortion k values");
  const SeedStream root(config.seed);
  std::vector<double> xs, ys;
  nlohmann::json ks = nlohmann::json::array();
  for (int k : config.distortion_ks) {
    const auto d = dynamics::iterate_distortion(f, k, config.distortion_samples,
                                                root.split(static_cast<std::uint64_t>(k)));
    xs.push_back(k);
    ys.push_back(std::log(d.value));
    ks.push_back({{"k", k}, {"K_sampled", d.value}, {"K_analytic", f.distortion_bound(k)}});
  }
  const double slope = ls_slope(xs, ys);
  const int n = f.manifold().dimension();
  const double log_deg = std::log(static_cast<double>(f.degree()));
  const double k1 = std::max(dynamics::iterate_distortion(f, 1, config.distortion_samples, root.split(0)).value,
                             f.distortion_bound(1));

  rep.lhs = h.value;
  rep.rhs = log_deg + n * std::max(0.0, slope);
  rep.decide_inequality();
  rep.details = {{"entropy", entropy::to_json(h)},
                 {"log_degree", log_deg},
                 {"distortion_slope", slope},
                 {"distortion", ks},
                 {"coarse_rhs", log_deg + n * std::log(k1)},
                 {"K", k1}};
  rep.notes.push_back("limsup of log K(f^k)/k replaced by the least-squares slope of sampled log K(f^k), floored at 0");
  return rep;
}

AuditReport audit_main_theorem(const MapHandle& f, const MainConfig& config,
                               const entropy::EntropyEstimate* precomputed) {
  AuditReport rep;
  rep.name = "entropy equals log degree";
  nlohmann::json cfg = entropy_config_json(f, config.entropy);
  cfg["balanced_k"] = config.balanced_k;
  cfg["balanced_samples"] = config.balanced_samples;
  cfg["ks_depth"] = config.ks_depth;
  cfg["ks_k"] = config.ks_k;
  cfg["ks_atoms"] = config.ks_atoms;
  cfg["ks_tolerance"] = config.ks_tolerance;
  if (config.entropy_tolerance) cfg["entropy_tolerance"] = *config.entropy_tolerance;
  rep.config_digest = config_digest(cfg);

  const geometry::ManifoldId& m = f.manifold();
  const double log_deg = std::log(static_cast<double>(f.degree()));
  const entropy::EntropyEstimate h =
      precomputed ? *precomputed
                  : entropy::topological_entropy_estimate(f, config.entropy.eps_schedule, config.entropy.k_range,
                                                          config.entropy.base);
  const AuditReport upper = audit_theorem_7_1(f, config.entropy, &h);
  rep.lhs = h.value;
  rep.rhs = log_deg;
  rep.details["entropy"] = to_json(h);
  rep.details["log_degree"] = log_deg;
  rep.details["upper_bound_audit"] = to_json(upper);

  if (m.is_sphere()) {
    rep.tolerance = config.entropy.tolerance;
    rep.pass = upper.pass;
    rep.details["verdict"] = upper.pass ? "upper bound verified; equality outside the main theorem's hypothesis"
                                        : "upper bound violated";
    rep.notes.push_back("rational cohomology spheres are excluded from the equality statement");
    return rep;
  }

  double tol = 0.2;
  if (config.entropy_tolerance) {
    tol = *config.entropy_tolerance;
  } else if (const auto* t = std::get_if<dynamics::ToralEndo>(&f.family())) {
    // Conformal linear part: A^T A is a multiple of the identity.
    const dynamics::Matrix a = t->matrix().cast<double>();
    const dynamics::Matrix ata = a.transpose() * a;
    const double s = ata.trace() / static_cast<double>(ata.rows());
    if ((ata - s * dynamics::Matrix::Identity(ata.rows(), ata.cols())).norm() < 1e-12 * s) tol = 0.15;
  }
  rep.tolerance = tol;
  const bool entropy_ok = std::abs(h.value - log_deg) <= tol;

  const SeedStream root(config.entropy.seed);
  const measures::EmpiricalMeasure mu =
      measures::balanced_iterate(f, config.balanced_k, config.balanced_samples, root.split(100));
  entropy::LowerBoundOptions lbo;
  const entropy::LowerBoundReport lb = entropy::entropy_lower_bound_report(f, mu, lbo);
  const bool bound_ok = lb.bound == log_deg && lb.branch_mass == 0.0;

  const measures::EmpiricalMeasure cloud = measures::EmpiricalMeasure::uniform_cloud(m, config.ks_atoms, root.split(101));
  const entropy::KsEstimate ks =
      entropy::ks_entropy_estimate(f, cloud, entropy::PartitionSpec::dyadic(m, config.ks_depth), config.ks_k);
  const bool ks_ok = std::abs(ks.value - log_deg) <= config.ks_tolerance;

  rep.pass = entropy_ok && bound_ok && ks_ok && upper.pass;
  rep.details["entropy_pass"] = entropy_ok;
  rep.details["measure_bound"] = entropy::measure_entropy_json(lb, &ks);
  rep.details["measure_bound_pass"] = bound_ok;
  rep.details["ks_pass"] = ks_ok;
  rep.details["verdict"] = rep.pass ? "pass" : "fail";
  rep.notes.push_back("pass iff |h_est - log deg| <= tolerance, the measure bound equals log deg with no branch mass, "
                      "the KS estimate is within ks_tolerance of log deg, and the upper-bound audit passes");
  return rep;
}

}  // namespace uqr::audits
