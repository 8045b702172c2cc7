#include "uqr/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "uqr/audits.hpp"
#include "uqr/entropy_measure.hpp"
#include "uqr/entropy_top.hpp"
#include "uqr/errors.hpp"
#include "uqr/graph_geometry.hpp"
#include "uqr/measures.hpp"

namespace uqr::cli {

using nlohmann::json;
using dynamics::MapHandle;

namespace {

entropy::BaseSource base_of(const RunConfig& c, const MapHandle& f) {
  if (f.manifold().is_sphere())
    return entropy::RandomSource{static_cast<std::size_t>(*c.budgets.random_samples), c.seed};
  return entropy::GridSource{*c.budgets.grid};
}

audits::EntropyConfig entropy_config(const RunConfig& c, const MapHandle& f) {
  audits::EntropyConfig e;
  e.eps_schedule = c.budgets.eps_schedule;
  e.k_range = c.budgets.k_range;
  e.base = base_of(c, f);
  e.distortion_ks = c.budgets.distortion_ks;
  e.distortion_samples = static_cast<int>(c.budgets.distortion_samples);
  e.tolerance = c.tolerances.audit;
  e.seed = c.seed;
  return e;
}

json audit_row(const AuditReport& r) { return to_json(r); }

void add_audit(CsvTable& t, const AuditReport& r) {
  t.add_row({r.name, r.lhs, r.rhs, r.tolerance, std::string(r.pass ? "pass" : "fail"), r.config_digest});
}

CsvTable audit_table() { return CsvTable({"audit", "lhs", "rhs", "tolerance", "verdict", "config_digest"}); }

// Dyadic boxes of side 1/4 (torus) or band/cap masses (sphere), plus the
// balancedness residual; the audit compares them to the configured tolerances.
struct BalancedSummary {
  CsvTable table{{"region", "mass", "target", "pass"}};
  json report;
  bool pass = true;
};

BalancedSummary balanced_summary(const RunConfig& c, const MapHandle& f, const measures::EmpiricalMeasure& mu) {
  BalancedSummary s;
  const auto& m = f.manifold();
  if (m.is_torus()) {
    const int n = m.dimension();
    std::size_t boxes = 1;
    for (int d = 0; d < n; ++d) boxes *= 4;
    const double target = 1.0 / static_cast<double>(boxes);
    double worst = 0.0;
    const std::vector<double> masses = measures::grid_box_masses(mu, 4);
    for (std::size_t b = 0; b < boxes; ++b) {
      measures::TorusBox box;
      std::size_t rem = b;
      for (int d = 0; d < n; ++d) {
        const double lo = static_cast<double>(rem % 4) / 4.0;
        box.lo.push_back(lo);
        box.hi.push_back(lo + 0.25);
        rem /= 4;
      }
      const double mass = masses[b];
      const bool ok = std::abs(mass - target) <= c.tolerances.box_mass;
      s.pass = s.pass && ok;
      worst = std::max(worst, std::abs(mass - target));
      std::string label = "box";
      for (int d = 0; d < n; ++d) label += ":" + format_double(box.lo[static_cast<std::size_t>(d)]);
      s.table.add_row({label, mass, target, std::string(ok ? "pass" : "fail")});
    }
    s.report["max_box_deviation"] = worst;
  } else {
    const double band = measures::equator_band_mass(mu, 0.1);
    const bool band_ok = band >= c.tolerances.equator_band;
    s.table.add_row({std::string("equator_band:0.1"), band, c.tolerances.equator_band,
                     std::string(band_ok ? "pass" : "fail")});
    json caps = json::array();
    bool cap_ok = true;
    for (double r : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
      const double mass = measures::pole_cap_mass(mu, r);
      const bool ok = r > 0.1 || mass <= c.tolerances.pole_cap;
      cap_ok = cap_ok && ok;
      s.table.add_row({"pole_caps:" + format_double(r), mass, r <= 0.1 ? c.tolerances.pole_cap : NAN,
                       std::string(ok ? "pass" : "fail")});
      caps.push_back({{"chordal_radius", r}, {"mass", mass}});
    }
    s.pass = band_ok && cap_ok;
    s.report["equator_band_mass"] = band;
    s.report["pole_cap_table"] = caps;
  }
  const auto res = measures::balancedness_residual(f, mu, measures::default_test_family(m));
  const bool res_ok = res.residual <= c.tolerances.balanced_residual;
  s.table.add_row({std::string("balancedness_residual"), res.residual, c.tolerances.balanced_residual,
                   std::string(res_ok ? "pass" : "fail")});
  s.pass = s.pass && res_ok;
  s.report["balancedness_residual"] = res.residual;
  s.report["atoms"] = mu.size();
  s.report["total_mass"] = mu.total();
  s.report["pass"] = s.pass;
  return s;
}

measures::EmpiricalMeasure balanced_measure(const RunConfig& c, const MapHandle& f) {
  measures::BalancedOptions opts;
  opts.atom_cap = static_cast<std::size_t>(c.budgets.atom_cap);
  return measures::balanced_iterate(f, *c.budgets.balanced_k, static_cast<std::size_t>(*c.budgets.balanced_samples),
                                    SeedStream(c.seed).split(11), opts);
}

ExperimentResult run_entropy_top(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  const auto est = entropy::topological_entropy_estimate(f, c.budgets.eps_schedule, c.budgets.k_range, base_of(c, f));
  r.results = entropy::entropy_table(est);
  r.report = entropy::to_json(est);
  r.report["log_degree"] = std::log(static_cast<double>(f.degree()));
  return r;
}

ExperimentResult run_entropy_measure(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  const auto mu = balanced_measure(c, f);
  entropy::LowerBoundOptions lbo;
  lbo.residual_threshold = c.tolerances.balanced_residual;
  const auto lb = entropy::entropy_lower_bound_report(f, mu, lbo);

  const auto& m = f.manifold();
  const auto part = m.is_torus() ? entropy::PartitionSpec::dyadic(m, c.budgets.ks_depth)
                                 : entropy::PartitionSpec::lon_lat(1 << c.budgets.ks_depth, 1 << c.budgets.ks_depth);
  entropy::KsEstimate ks;
  if (*c.budgets.ks_measure == "uniform") {
    const auto cloud = measures::EmpiricalMeasure::uniform_cloud(m, static_cast<std::size_t>(c.budgets.ks_atoms),
                                                                  SeedStream(c.seed).split(12));
    ks = entropy::ks_entropy_estimate(f, cloud, part, c.budgets.ks_k);
  } else {
    ks = entropy::ks_entropy_estimate(f, mu, part, c.budgets.ks_k);
  }
  r.results = CsvTable({"k", "ks_entropy", "lower_bound", "log_degree"});
  for (std::size_t i = 0; i < ks.sequence.size(); ++i)
    r.results.add_row({static_cast<long long>(i + 1), ks.sequence[i], lb.bound, lb.log_degree});
  r.report = entropy::measure_entropy_json(lb, &ks);
  r.report["partition"] = part.describe();
  r.report["ks_measure"] = *c.budgets.ks_measure;
  return r;
}

ExperimentResult run_balanced_measure(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  const auto mu = balanced_measure(c, f);
  BalancedSummary s = balanced_summary(c, f, mu);
  r.results = std::move(s.table);
  r.report = std::move(s.report);
  r.pass = s.pass;
  if (c.budgets.write_atoms) {
    std::filesystem::create_directories(c.output_dir);
    std::ofstream out(std::filesystem::path(c.output_dir) / "measure.csv", std::ios::binary);
    mu.write_csv(out);
    r.report["artifacts"] = json::array({"measure.csv"});
  }
  return r;
}

ExperimentResult run_chain_volume(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  const auto lov = entropy::lov_estimate(f, c.budgets.k_range, static_cast<std::size_t>(c.budgets.mc_samples),
                                         SeedStream(c.seed).split(13));
  r.results = CsvTable({"k", "volume", "std_error", "flagged"});
  json rows = json::array();
  for (std::size_t i = 0; i < lov.ks.size(); ++i) {
    const auto& v = lov.volumes[i];
    r.results.add_row({static_cast<long long>(lov.ks[i]), v.value, v.std_error, std::string(v.flagged ? "1" : "0")});
    rows.push_back({{"k", lov.ks[i]}, {"volume", v.value}, {"std_error", v.std_error}, {"flagged", v.flagged}});
  }
  r.report = {{"lov", lov.slope}, {"flagged", lov.flagged}, {"volumes", rows},
              {"normalization", lov.volumes.empty() ? "" : lov.volumes.front().normalization}};
  return r;
}

graph::AhlforsScan ahlfors(const RunConfig& c, const MapHandle& f) {
  SeedStream cs = SeedStream(c.seed).split(14);
  std::vector<geometry::Point> centers;
  for (long long i = 0; i < c.budgets.ahlfors_centers; ++i) centers.push_back(geometry::sample_uniform(f.manifold(), cs));
  graph::AhlforsOptions opts;
  opts.slope_tolerance = c.tolerances.ahlfors_slope;
  opts.spread_bound = c.tolerances.ahlfors_spread;
  opts.samples = static_cast<std::size_t>(c.budgets.ahlfors_samples);
  opts.seed = c.seed;
  return graph::ahlfors_scan(f, *c.budgets.ahlfors_k, centers, c.budgets.radii, opts);
}

json ahlfors_json(const graph::AhlforsScan& s) {
  return {{"k", s.k},          {"n", s.n},           {"slope", s.slope},     {"center_slopes", s.center_slopes},
          {"spread", s.spread}, {"flagged", s.flagged}, {"pass", s.pass}, {"radii", s.radii}};
}

ExperimentResult run_ahlfors(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  const auto s = ahlfors(c, f);
  r.results = CsvTable({"center", "r", "volume", "std_error", "ratio"});
  for (const auto& row : s.table)
    r.results.add_row({static_cast<long long>(row.center), row.r, row.volume, row.std_error, row.ratio});
  r.report = ahlfors_json(s);
  r.pass = s.pass;
  return r;
}

ExperimentResult run_bihari(const RunConfig& c) {
  ExperimentResult r;
  const auto st = audits::bihari_selftest(static_cast<std::size_t>(c.budgets.bihari_instances), c.seed,
                                          static_cast<std::size_t>(c.budgets.bihari_points));
  r.results = CsvTable({"n", "instance", "hypothesis_points", "violations", "worst_deficit"});
  for (const auto& rep : st.reports)
    r.results.add_row({static_cast<long long>(rep.details["n"].get<int>()),
                       static_cast<long long>(rep.details["instance"].get<std::size_t>()),
                       static_cast<long long>(rep.details["hypothesis_points"].get<std::size_t>()),
                       static_cast<long long>(rep.details["violations"].get<std::size_t>()), rep.lhs});
  r.report = {{"instances", st.instances}, {"failures", st.failures}, {"checked_points", st.checked_points}};
  r.pass = st.failures == 0;
  return r;
}

std::vector<graph::ComponentMap> components_of(const RunConfig& c, const MapHandle& f) {
  std::vector<graph::ComponentMap> comps;
  for (int p : c.budgets.pointwise_powers) comps.push_back({f, p});
  return comps;
}

ExperimentResult run_audit_all(const RunConfig& c, const MapHandle& f) {
  ExperimentResult r;
  r.results = audit_table();
  json list = json::array();
  auto record = [&](const AuditReport& a) {
    add_audit(r.results, a);
    list.push_back(audit_row(a));
    r.pass = r.pass && a.pass;
  };

  const auto ec = entropy_config(c, f);

  entropy::Theorem31Config t31;
  t31.eps_schedule = ec.eps_schedule;
  t31.k_range = ec.k_range;
  t31.base = ec.base;
  t31.volume_samples = static_cast<std::size_t>(c.budgets.mc_samples);
  t31.centers = static_cast<std::size_t>(c.budgets.centers);
  t31.local_samples = static_cast<std::size_t>(c.budgets.local_samples);
  t31.tolerance = c.tolerances.audit;
  t31.seed = c.seed;
  const entropy::EntropyEstimate h = entropy::topological_entropy_estimate(f, ec.eps_schedule, ec.k_range, ec.base);
  record(entropy::audit_theorem_3_1(f, t31, &h));

  audits::MainConfig mc;
  mc.entropy = ec;
  mc.entropy_tolerance = c.tolerances.entropy;
  mc.balanced_k = std::min(*c.budgets.balanced_k, 4);
  mc.balanced_samples = static_cast<std::size_t>(std::min<long long>(*c.budgets.balanced_samples, 1000));
  mc.ks_depth = c.budgets.ks_depth;
  mc.ks_k = c.budgets.ks_k;
  mc.ks_atoms = static_cast<std::size_t>(c.budgets.ks_atoms);
  mc.ks_tolerance = c.tolerances.ks;
  record(audits::audit_main_theorem(f, mc, &h));

  AuditReport pw = graph::check_pointwise_bound(components_of(c, f), static_cast<std::size_t>(c.budgets.pointwise_samples),
                                                SeedStream(c.seed).split(15));
  if (pw.config_digest.empty()) pw.config_digest = config_digest(to_json(c));
  record(pw);

  const auto mu = balanced_measure(c, f);
  BalancedSummary bs = balanced_summary(c, f, mu);
  AuditReport bal;
  bal.name = "balanced measure";
  bal.lhs = bs.report["balancedness_residual"].get<double>();
  bal.rhs = c.tolerances.balanced_residual;
  bal.pass = bs.pass;
  bal.details = bs.report;
  bal.config_digest = config_digest(to_json(c));
  record(bal);

  const auto scan = ahlfors(c, f);
  AuditReport ah;
  ah.name = "ahlfors regularity";
  ah.lhs = std::abs(scan.slope - scan.n);
  ah.rhs = 0.0;
  ah.tolerance = c.tolerances.ahlfors_slope;
  ah.pass = scan.pass;
  ah.details = ahlfors_json(scan);
  ah.config_digest = bal.config_digest;
  record(ah);

  const auto bh = run_bihari(c);
  AuditReport bi;
  bi.name = "bihari-lasalle selftest";
  bi.lhs = static_cast<double>(bh.report["failures"].get<std::size_t>());
  bi.rhs = 0.0;
  bi.pass = bh.pass;
  bi.details = bh.report;
  bi.config_digest = bal.config_digest;
  record(bi);

  r.report = {{"audits", list}, {"verdict", r.pass ? "pass" : "fail"}};
  return r;
}

}  // namespace

ExperimentResult execute(const RunConfig& input) {
  const RunConfig config = resolve(input);
  const MapHandle f = build_map(config.map);
  ExperimentResult r;
  const std::string& e = config.experiment;
  if (e == "entropy-top") r = run_entropy_top(config, f);
  else if (e == "entropy-measure") r = run_entropy_measure(config, f);
  else if (e == "balanced-measure") r = run_balanced_measure(config, f);
  else if (e == "chain-volume") r = run_chain_volume(config, f);
  else if (e == "ahlfors-scan") r = run_ahlfors(config, f);
  else if (e == "bihari-selftest") r = run_bihari(config);
  else if (e == "audit-all") r = run_audit_all(config, f);
  else throw ConfigError("unknown experiment '" + e + "'");
  r.report["experiment"] = e;
  r.report["map"] = f.describe();
  r.report["config_digest"] = config_digest(to_json(config));
  r.report["pass"] = r.pass;
  return r;
}

int run_and_write(const RunConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = execute(config);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  auto write_atomic = [&](const std::string& name, const std::string& text) {
    const fs::path tmp = dir / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << text;
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, dir / name);
  };
  write_atomic("results.csv", r.results.str());
  write_atomic("report.json", r.report.dump(2) + "\n");
  write_atomic("resolved-config.json", to_json(config).dump(2) + "\n");
  log << config.experiment << " on " << r.report["map"].get<std::string>() << ": "
      << (r.pass ? "pass" : "FAIL") << " (" << std::fixed << std::setprecision(1) << secs << " s), outputs in " << dir.string() << "\n";
  return r.pass ? kOk : kAuditFailed;
}

}  // namespace uqr::cli
