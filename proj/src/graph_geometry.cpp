#include "uqr/graph_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uqr/errors.hpp"
#include "uqr/parallel.hpp"

namespace uqr::graph {

namespace {

/// Least-squares slope of ys against xs.
double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

/// Uniform point whose height coordinate (x_1 on the torus, z on the sphere)
/// lies in slab i of m.
Point stratified_sample(const geometry::ManifoldId& m, std::size_t i, std::size_t slabs, SeedStream& s) {
  const double h = (static_cast<double>(i) + s.uniform()) / static_cast<double>(slabs);
  if (m.is_torus()) {
    std::array<double, geometry::kMaxAmbient> c{};
    c[0] = h;
    for (int a = 1; a < m.dim; ++a) c[a] = s.uniform();
    return Point(m, std::span<const double>(c.data(), m.dim));
  }
  const double z = -1.0 + 2.0 * h;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * std::numbers::pi * s.uniform();
  return Point::sphere(rho * std::cos(phi), rho * std::sin(phi), z);
}

}  // namespace

double gram_jacobian(const std::vector<Matrix>& ds) {
  if (ds.empty()) throw DomainError("gram_jacobian: no components");
  const auto n = ds.front().cols();
  Matrix g = Matrix::Zero(n, n);
  for (const Matrix& d : ds) g.noalias() += d.transpose() * d;
  return std::sqrt(std::max(0.0, g.determinant()));
}

double n_jacobian(const MapHandle& f, int k, const Point& x) {
  if (k < 0) throw DomainError("n_jacobian: k must be >= 0");
  return gram_jacobian(dynamics::orbit_differentials(f, x, k));
}

VolumeEstimate chain_volume(const MapHandle& f, int k, std::size_t samples, const SeedStream& rng) {
  if (samples < 2) throw DomainError("chain_volume: need at least 2 samples");
  const auto& m = f.manifold();
  std::vector<double> y(samples);
  parallel_for(samples, [&](std::size_t i) {
    SeedStream s = rng.split(i);
    y[i] = n_jacobian(f, k, stratified_sample(m, i, samples, s));
  });
  const double vol = geometry::manifold_volume(m);
  const double mean = pairwise_sum(y) / static_cast<double>(samples);
  // Collapsed-strata variance: adjacent slabs paired.
  std::vector<double> sq(samples / 2);
  for (std::size_t p = 0; p < sq.size(); ++p) {
    const double d = y[2 * p] - y[2 * p + 1];
    sq[p] = d * d;
  }
  const double var = pairwise_sum(sq) / (static_cast<double>(samples) * static_cast<double>(samples));
  VolumeEstimate est;
  est.value = vol * mean;
  est.std_error = vol * std::sqrt(var);
  est.samples = samples;
  est.hits = samples;
  est.flagged = est.std_error > 0.1 * std::abs(est.value);
  est.normalization = m.is_torus() ? "torus volume 1" : "sphere area 4*pi";
  return est;
}

VolumeEstimate local_volume(const MapHandle& f, int k, const Point& center, double r,
                            ChainMetric metric, std::size_t samples, const SeedStream& rng,
                            const LocalVolumeOptions& opts) {
  if (!(r > 0.0)) throw DomainError("local_volume: radius must be positive");
  if (samples < 2) throw DomainError("local_volume: need at least 2 samples");
  const auto& m = f.manifold();
  const double inj = geometry::injectivity_radius(m);
  const double total_vol = geometry::manifold_volume(m);
  // Orbit of the center.
  std::vector<Point> orbit{center};
  for (int j = 1; j <= k; ++j) orbit.push_back(f.eval(orbit.back()));

  // Superset: the first coordinate alone must be within r.
  double big_r = opts.sampling_radius.value_or(r);
  const bool big_is_manifold = big_r >= inj;
  const double big_vol = big_is_manifold ? total_vol : geometry::ball_volume(m, big_r);

  double small_r = big_r;
  if (!opts.sampling_radius) {
    const auto ds = dynamics::orbit_differentials(f, center, k);
    double expansion = 0.0;
    for (const Matrix& d : ds) {
      const double s = dynamics::min_singular_value(d);
      expansion = metric == ChainMetric::sup ? std::max(expansion, s) : expansion + s * s;
    }
    if (metric == ChainMetric::product) expansion = std::sqrt(expansion);
    if (expansion > 0.0) small_r = std::min(big_r, opts.pullback_safety * r / expansion);
  }
  const bool mixture = small_r < 0.999 * big_r && small_r < inj;
  const double alpha = mixture ? opts.superset_fraction : 1.0;
  const double small_vol = mixture ? geometry::ball_volume(m, small_r) : big_vol;

  const double r2 = r * r;
  std::vector<double> val(samples, 0.0);
  std::vector<unsigned char> hit(samples, 0);
  parallel_for(samples, [&](std::size_t i) {
    SeedStream s = rng.split(i);
    Point x;
    if (!mixture || s.uniform() < alpha) {
      x = big_is_manifold ? geometry::sample_uniform(m, s) : geometry::sample_ball(center, big_r, s);
    } else {
      x = geometry::sample_ball(center, small_r, s);
    }
    const double d0 = geometry::dist(x, center);
    if (!big_is_manifold && d0 >= big_r) return;  // outside the proposal support
    const double q = alpha / big_vol + (mixture && d0 < small_r ? (1.0 - alpha) / small_vol : 0.0);
    // Chain distance with early exit.
    double acc = metric == ChainMetric::sup ? d0 : d0 * d0;
    if ((metric == ChainMetric::sup ? acc : std::sqrt(acc)) >= r) return;
    Point p = x;
    for (int j = 1; j <= k; ++j) {
      p = f.eval(p);
      const double d = geometry::dist_raw(m, p.coords().data(), orbit[j].coords().data());
      if (metric == ChainMetric::sup) {
        if (d >= r) return;
      } else {
        acc += d * d;
        if (acc >= r2) return;
      }
    }
    hit[i] = 1;
    val[i] = n_jacobian(f, k, x) / q;
  });

  VolumeEstimate est;
  est.samples = samples;
  for (unsigned char h : hit) est.hits += h;
  if (est.hits == 0) {
    throw BudgetError("local_volume: no sample landed in the ball; use a larger radius or more samples");
  }
  const double ns = static_cast<double>(samples);
  const double mean = pairwise_sum(val) / ns;
  std::vector<double> dev(samples);
  for (std::size_t i = 0; i < samples; ++i) dev[i] = (val[i] - mean) * (val[i] - mean);
  const double var = pairwise_sum(dev) / (ns - 1.0);
  est.value = mean;
  est.std_error = std::sqrt(var / ns);
  est.flagged = est.std_error > 0.1 * est.value;
  est.normalization = m.is_torus() ? "torus volume 1" : "sphere area 4*pi";
  return est;
}

AhlforsScan ahlfors_scan(const MapHandle& f, int k, const std::vector<Point>& centers,
                         const std::vector<double>& radii, const AhlforsOptions& opts) {
  if (centers.empty()) throw DomainError("ahlfors_scan: no centers");
  if (radii.size() < 2) throw DomainError("ahlfors_scan: need at least two radii");
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] < radii[i - 1])) throw DomainError("ahlfors_scan: radii must be strictly decreasing");
  }
  const double diam = geometry::manifold_diameter(f.manifold()) * std::sqrt(k + 1.0);
  if (!(radii.back() > 0.0) || radii.front() > diam) {
    throw DomainError("ahlfors_scan: radii must lie in (0, diam]");
  }
  AhlforsScan scan;
  scan.k = k;
  scan.n = f.manifold().dim;
  scan.radii = radii;
  for (const Point& c : centers) scan.centers.push_back(dynamics::chain_point(f, c, k));
  scan.table.resize(centers.size() * radii.size());
  const SeedStream root(opts.seed, 0xa41f);
  // Per-(center, radius) tasks run sequentially inside; each uses its own stream.
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const VolumeEstimate v = local_volume(f, k, centers[c], radii[i], ChainMetric::product,
                                            opts.samples, root.split(c * radii.size() + i));
      AhlforsRow& row = scan.table[c * radii.size() + i];
      row.center = c;
      row.r = radii[i];
      row.volume = v.value;
      row.std_error = v.std_error;
      row.ratio = v.value / std::pow(radii[i], scan.n);
      scan.flagged = scan.flagged || v.flagged;
    }
  }
  double lo = INFINITY, hi = 0.0;
  bool slopes_ok = true;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const AhlforsRow& row = scan.table[c * radii.size() + i];
      lx.push_back(std::log(row.r));
      ly.push_back(std::log(row.volume));
      lo = std::min(lo, row.ratio);
      hi = std::max(hi, row.ratio);
    }
    const double s = ls_slope(lx, ly);
    scan.center_slopes.push_back(s);
    slopes_ok = slopes_ok && std::abs(s - scan.n) <= opts.slope_tolerance;
  }
  double sum = 0.0;
  for (double s : scan.center_slopes) sum += s;
  scan.slope = sum / static_cast<double>(scan.center_slopes.size());
  scan.spread = hi / lo;
  scan.pass = slopes_ok && std::abs(scan.slope - scan.n) <= opts.slope_tolerance &&
              scan.spread <= opts.spread_bound;
  return scan;
}

AuditReport check_pointwise_bound(const std::vector<ComponentMap>& components, std::size_t samples,
                                  const SeedStream& rng, std::optional<double> K) {
  if (components.empty()) throw DomainError("check_pointwise_bound: no components");
  const auto& m = components.front().map.manifold();
  for (const auto& c : components) {
    if (!(c.map.manifold() == m)) throw DomainError("check_pointwise_bound: components on different manifolds");
    if (c.power < 1) throw DomainError("check_pointwise_bound: component powers must be >= 1");
  }
  const int n = m.dim;
  const double kc = static_cast<double>(components.size());

  struct Sample {
    double jg = 0.0;
    double sum_j = 0.0;
    double distortion = 1.0;
  };
  std::vector<Sample> data(samples);
  parallel_for(samples, [&](std::size_t i) {
    SeedStream s = rng.split(i);
    for (;;) {
      const Point x = geometry::sample_uniform(m, s);
      std::vector<Matrix> ds;
      Sample smp;
      bool branch = false;
      for (const auto& c : components) {
        Matrix d = dynamics::orbit_differentials(c.map, x, c.power).back();
        const double j = std::abs(d.determinant());
        if (!(j > 0.0)) {
          branch = true;
          break;
        }
        smp.sum_j += j;
        smp.distortion = std::max(smp.distortion, std::pow(dynamics::operator_norm(d), n) / j);
        ds.push_back(std::move(d));
      }
      if (branch) continue;
      smp.jg = gram_jacobian(ds);
      data[i] = smp;
      return;
    }
  });

  double sampled_k = 1.0;
  for (const auto& d : data) sampled_k = std::max(sampled_k, d.distortion);
  double analytic_k = 1.0;
  for (const auto& c : components) analytic_k = std::max(analytic_k, c.map.distortion_bound(c.power));
  const double k_used = K.value_or(std::max(sampled_k, analytic_k));

  const double constant = std::pow(n, n / 2.0) * k_used * std::pow(kc, n / 2.0 - 1.0);
  std::size_t violations = 0;
  double worst_slack = INFINITY;
  double worst_lhs = 0.0, worst_rhs = 0.0;
  for (const auto& d : data) {
    const double rhs = constant * d.sum_j;
    const double slack = (rhs - d.jg) / std::max(1.0, rhs);
    if (slack < -1e-9) ++violations;
    if (slack < worst_slack) {
      worst_slack = slack;
      worst_lhs = d.jg;
      worst_rhs = rhs;
    }
  }
  AuditReport rep;
  rep.name = "pointwise_jacobian_bound";
  rep.lhs = worst_lhs;
  rep.rhs = worst_rhs;
  rep.tolerance = 1e-9 * std::max(1.0, worst_rhs);
  rep.pass = violations == 0;
  rep.details = {{"samples", samples},          {"components", components.size()},
                 {"violations", violations},    {"worst_relative_slack", worst_slack},
                 {"K_used", k_used},            {"K_sampled", sampled_k},
                 {"K_analytic", analytic_k},    {"constant", constant}};
  std::vector<std::string> comp;
  for (const auto& c : components) comp.push_back(c.map.describe() + " ^" + std::to_string(c.power));
  rep.details["component_maps"] = comp;
  rep.notes.push_back("lhs/rhs are taken at the sample with the smallest relative slack");
  return rep;
}

}  // namespace uqr::graph
