#include "uqr/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "uqr/errors.hpp"
#include "uqr/parallel.hpp"

namespace uqr::measures {

using dynamics::Preimage;

// =============================================================================
// EmpiricalMeasure
// =============================================================================

EmpiricalMeasure EmpiricalMeasure::dirac(const Point& x, double weight) {
  EmpiricalMeasure mu(x.manifold());
  mu.add(x, weight);
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::uniform_cloud(const ManifoldId& m, std::size_t n,
                                                 const SeedStream& rng) {
  EmpiricalMeasure mu(m);
  const std::size_t amb = m.ambient_dim();
  mu.coords_.resize(n * amb);
  mu.weights_.assign(n, 1.0 / static_cast<double>(n));
  parallel_for((n + kReduceBlock - 1) / kReduceBlock, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock, hi = std::min(n, lo + kReduceBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      SeedStream s = rng.split(i);
      const Point p = geometry::sample_uniform(m, s);
      std::copy_n(p.coords().begin(), amb, mu.coords_.begin() + static_cast<std::ptrdiff_t>(i * amb));
    }
  });
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::uniform_grid(const ManifoldId& m, int res) {
  if (!m.is_torus()) throw DomainError("uniform_grid: torus only");
  if (res < 1) throw DomainError("uniform_grid: resolution must be positive");
  EmpiricalMeasure mu(m);
  std::size_t count = 1;
  for (int i = 0; i < m.dim; ++i) count *= static_cast<std::size_t>(res);
  mu.reserve(count);
  const double w = 1.0 / static_cast<double>(count);
  std::array<double, geometry::kMaxAmbient> c{};
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t r = idx;
    for (int a = 0; a < m.dim; ++a) {
      c[a] = static_cast<double>(r % res) / res;
      r /= res;
    }
    mu.add(Point(m, std::span<const double>(c.data(), m.dim)), w);
  }
  return mu;
}

Point EmpiricalMeasure::atom(std::size_t i) const { return Point::canonical(manifold_, raw_coords(i)); }

std::span<const double> EmpiricalMeasure::raw_coords(std::size_t i) const {
  const std::size_t amb = manifold_.ambient_dim();
  return {coords_.data() + i * amb, amb};
}

void EmpiricalMeasure::add(const Point& x, double w) {
  if (!(x.manifold() == manifold_)) throw DomainError("measure atom on the wrong manifold");
  if (!(w >= 0.0)) throw DomainError("measure weights must be nonnegative");
  coords_.insert(coords_.end(), x.coords().begin(), x.coords().end());
  weights_.push_back(w);
}

void EmpiricalMeasure::reserve(std::size_t n) {
  coords_.reserve(n * manifold_.ambient_dim());
  weights_.reserve(n);
}

double EmpiricalMeasure::total() const {
  return blocked_sum(weights_.size(), [&](std::size_t i) { return weights_[i]; });
}

void EmpiricalMeasure::require_probability(double tol) const {
  const double t = total();
  if (std::abs(t - 1.0) > tol) {
    std::ostringstream os;
    os << "expected a probability measure, total mass is " << std::setprecision(17) << t;
    throw DomainError(os.str());
  }
}

void EmpiricalMeasure::write_csv(std::ostream& os) const {
  const std::size_t amb = manifold_.ambient_dim();
  for (std::size_t a = 0; a < amb; ++a) os << 'c' << a << ',';
  os << "w\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t a = 0; a < amb; ++a) os << coords_[i * amb + a] << ',';
    os << weights_[i] << '\n';
  }
}

EmpiricalMeasure EmpiricalMeasure::read_csv(const ManifoldId& m, std::istream& is) {
  EmpiricalMeasure mu(m);
  const std::size_t amb = m.ambient_dim();
  std::string line;
  if (!std::getline(is, line)) throw DomainError("measure CSV: missing header");
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw DomainError("measure CSV: bad number on row " + std::to_string(row));
      }
      fields.push_back(v);
      pos = comma + 1;
    }
    if (fields.size() != amb + 1) {
      throw DomainError("measure CSV: row " + std::to_string(row) + " has wrong field count");
    }
    if (m.is_torus()) {
      for (std::size_t a = 0; a < amb; ++a) {
        if (!(fields[a] >= 0.0 && fields[a] < 1.0)) {
          throw DomainError("measure CSV: torus coordinate outside [0,1) on row " + std::to_string(row));
        }
      }
    } else if (std::abs(std::hypot(fields[0], fields[1], fields[2]) - 1.0) > 1e-12) {
      throw DomainError("measure CSV: sphere atom off the unit sphere on row " + std::to_string(row));
    }
    if (!(fields[amb] >= 0.0)) throw DomainError("measure CSV: negative weight");
    mu.coords_.insert(mu.coords_.end(), fields.begin(), fields.begin() + static_cast<std::ptrdiff_t>(amb));
    mu.weights_.push_back(fields[amb]);
  }
  return mu;
}

// =============================================================================
// Test functions
// =============================================================================

TestFunction constant_function(double c) {
  return {[c](const Point&) { return c; }, std::abs(c), "const"};
}

TestFamily::TestFamily(BatchFn batch, std::vector<double> sup_abs, std::vector<std::string> labels,
                       AccumFn accumulate)
    : batch_(std::move(batch)), accum_(std::move(accumulate)), sup_(std::move(sup_abs)), labels_(std::move(labels)) {
  if (sup_.size() != labels_.size()) throw DomainError("test family: label count mismatch");
}

void TestFamily::accumulate(const Point& x, double w, std::span<double> sum) const {
  if (accum_) {
    accum_(x, w, sum);
    return;
  }
  thread_local std::vector<double> vals;
  vals.resize(size());
  batch_(x, vals);
  for (std::size_t j = 0; j < vals.size(); ++j) sum[j] += w * vals[j];
}

TestFamily TestFamily::from_functions(std::vector<TestFunction> fns) {
  std::vector<double> sups;
  std::vector<std::string> labels;
  for (const auto& f : fns) {
    sups.push_back(f.sup_abs);
    labels.push_back(f.label);
  }
  auto batch = [fns = std::move(fns)](const Point& x, std::span<double> out) {
    for (std::size_t i = 0; i < fns.size(); ++i) out[i] = fns[i](x);
  };
  return TestFamily(std::move(batch), std::move(sups), std::move(labels));
}

namespace {

using Pair = double __attribute__((vector_size(16)));

inline void add_pair(double* o, Pair p) {
  Pair acc;
  std::memcpy(&acc, o, sizeof acc);
  acc += p;
  std::memcpy(o, &acc, sizeof acc);
}

}  // namespace

void sincos_turns(double x, double& s, double& c) {
  // x = q / 4 + u exactly, |u| <= 1/8, so the polynomials only see |theta| <= pi / 4.
  x = geometry::wrap01(x);
  const double q = static_cast<double>(static_cast<int>(4.0 * x + 0.5));
  const double t = 2.0 * std::numbers::pi * (x - 0.25 * q);
  const double t2 = t * t;
  // Taylor series through t^17 and t^16; the first omitted terms are below 1e-16.
  double ps = 1.0 / 355687428096000.0;
  ps = ps * t2 - 1.0 / 1307674368000.0;
  ps = ps * t2 + 1.0 / 6227020800.0;
  ps = ps * t2 - 1.0 / 39916800.0;
  ps = ps * t2 + 1.0 / 362880.0;
  ps = ps * t2 - 1.0 / 5040.0;
  ps = ps * t2 + 1.0 / 120.0;
  ps = ps * t2 - 1.0 / 6.0;
  const double st = t + t * t2 * ps;
  double pc = 1.0 / 20922789888000.0;
  pc = pc * t2 - 1.0 / 87178291200.0;
  pc = pc * t2 + 1.0 / 479001600.0;
  pc = pc * t2 - 1.0 / 3628800.0;
  pc = pc * t2 + 1.0 / 40320.0;
  pc = pc * t2 - 1.0 / 720.0;
  pc = pc * t2 + 1.0 / 24.0;
  pc = pc * t2 - 0.5;
  const double ct = 1.0 + t2 * pc;
  switch (static_cast<int>(q) & 3) {
    case 0: s = st; c = ct; break;
    case 1: s = ct; c = -st; break;
    case 2: s = -st; c = -ct; break;
    default: s = -ct; c = st; break;
  }
}

TestFamily torus_test_family(const ManifoldId& m, int cutoff) {
  if (!m.is_torus()) throw DomainError("torus_test_family: torus only");
  if (cutoff < 0 || 2 * cutoff + 1 > 32) throw DomainError("torus_test_family: cutoff must be in [0, 15]");
  const int n = m.dim;
  // Nonzero frequency vectors with first nonzero component positive.
  std::vector<std::array<int, geometry::kMaxTorusDim>> freqs;
  std::array<int, geometry::kMaxTorusDim> p{};
  const int side = 2 * cutoff + 1;
  int total = 1;
  for (int a = 0; a < n; ++a) total *= side;
  for (int idx = 0; idx < total; ++idx) {
    int r = idx;
    for (int a = 0; a < n; ++a) {
      p[a] = r % side - cutoff;
      r /= side;
    }
    int lead = 0;
    for (int a = 0; a < n && lead == 0; ++a) lead = p[a];
    if (lead > 0) freqs.push_back(p);
  }
  int boxes = 1;
  for (int a = 0; a < n; ++a) boxes *= 4;

  std::vector<double> sups;
  std::vector<std::string> labels;
  for (const auto& q : freqs) {
    std::string tag = "(";
    for (int a = 0; a < n; ++a) tag += (a ? "," : "") + std::to_string(q[a]);
    tag += ")";
    sups.push_back(1.0);
    labels.push_back("cos" + tag);
    sups.push_back(1.0);
    labels.push_back("sin" + tag);
  }
  for (int b = 0; b < boxes; ++b) {
    sups.push_back(1.0);
    labels.push_back("box" + std::to_string(b));
  }

  // flat[f * n + a] indexes exp(2 pi i q_a x_a) in the per-point power table
  constexpr int kRow = 32;
  std::vector<int> flat;
  for (const auto& q : freqs)
    for (int a = 0; a < n; ++a) flat.push_back(a * kRow + q[a] + cutoff);

  using Table = std::array<double, kRow * geometry::kMaxTorusDim>;
  // (re, im)[a * kRow + e + cutoff] = exp(2 pi i e x_a); real arithmetic avoids the checked complex multiply
  auto powers = [n, cutoff](const Point& x, Table& re, Table& im) {
    for (int a = 0; a < n; ++a) {
      double* r = re.data() + a * kRow + cutoff;
      double* i = im.data() + a * kRow + cutoff;
      double s, c;
      sincos_turns(x[a], s, c);
      r[0] = 1.0;
      i[0] = 0.0;
      for (int e = 1; e <= cutoff; ++e) {
        r[e] = r[e - 1] * c - i[e - 1] * s;
        i[e] = r[e - 1] * s + i[e - 1] * c;
        r[-e] = r[e];
        i[-e] = -i[e];
      }
    }
  };
  auto box_of = [n](const Point& x) {
    int cell = 0, stride = 1;
    for (int a = 0; a < n; ++a) {
      cell += std::min(3, static_cast<int>(x[a] * 4.0)) * stride;
      stride *= 4;
    }
    return cell;
  };

  auto batch = [n, flat, powers, box_of](const Point& x, std::span<double> out) {
    Table re, im;
    powers(x, re, im);
    std::size_t o = 0;
    for (std::size_t f = 0; f < flat.size(); f += n) {
      double vr = re[flat[f]], vi = im[flat[f]];
      for (int a = 1; a < n; ++a) {
        const double wr = re[flat[f + a]], wi = im[flat[f + a]];
        const double t = vr * wr - vi * wi;
        vi = vr * wi + vi * wr;
        vr = t;
      }
      out[o++] = vr;
      out[o++] = vi;
    }
    std::fill(out.begin() + o, out.end(), 0.0);
    out[o + box_of(x)] = 1.0;
  };

  // Integration fast path. On T^2 the frequencies run over p1 = -c..c, each
  // with (0, p1) first when p1 > 0 and then (1..c, p1).
  auto accum = [n, cutoff, flat, powers, box_of, batch](const Point& x, double w, std::span<double> sum) {
    if (n != 2) {
      thread_local std::vector<double> vals;
      vals.resize(sum.size());
      batch(x, vals);
      for (std::size_t j = 0; j < vals.size(); ++j) sum[j] += w * vals[j];
      return;
    }
    Table re, im;
    powers(x, re, im);
    const double* r0 = re.data() + cutoff;
    const double* i0 = im.data() + cutoff;
    const double* r1 = re.data() + kRow + cutoff;
    const double* i1 = im.data() + kRow + cutoff;
    double* o = sum.data();
    auto rows = [&](auto c) {
      for (int b = -c; b <= c; ++b) {
        // u = w e(b x_1) and v = i u, so each (re, im) pair gains r0 u + i0 v.
        const Pair u = {w * r1[b], w * i1[b]};
        const Pair v = {-u[1], u[0]};
        if (b > 0) {
          add_pair(o, u);
          o += 2;
        }
        for (int a = 1; a <= c; ++a) {
          add_pair(o, r0[a] * u + i0[a] * v);
          o += 2;
        }
      }
    };
    // The default cutoff gets a compile-time trip count.
    if (cutoff == 3) rows(std::integral_constant<int, 3>{});
    else rows(cutoff);
    o[box_of(x)] += w;
  };
  return TestFamily(std::move(batch), std::move(sups), std::move(labels), std::move(accum));
}

std::vector<Point> fibonacci_sphere(int count) {
  std::vector<Point> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    out.push_back(Point::sphere(r * std::cos(phi), r * std::sin(phi), z));
  }
  return out;
}

TestFamily sphere_test_family(int centers, double chordal_radius) {
  const std::vector<Point> cs = fibonacci_sphere(centers);
  std::vector<double> sups(cs.size(), 1.0);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < cs.size(); ++i) labels.push_back("cap" + std::to_string(i));
  const double r2 = chordal_radius * chordal_radius;
  auto batch = [cs, r2](const Point& x, std::span<double> out) {
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double dx = x[0] - cs[i][0], dy = x[1] - cs[i][1], dz = x[2] - cs[i][2];
      out[i] = (dx * dx + dy * dy + dz * dz < r2) ? 1.0 : 0.0;
    }
  };
  return TestFamily(std::move(batch), std::move(sups), std::move(labels));
}

TestFamily default_test_family(const ManifoldId& m) {
  return m.is_torus() ? torus_test_family(m, 3) : sphere_test_family(20, 0.5);
}

// =============================================================================
// Regions
// =============================================================================

bool contains(const Region& r, const Point& x) {
  return std::visit(
      [&](const auto& reg) -> bool {
        using T = std::decay_t<decltype(reg)>;
        if constexpr (std::is_same_v<T, TorusBox>) {
          if (!x.manifold().is_torus() || static_cast<int>(reg.lo.size()) != x.size() ||
              reg.hi.size() != reg.lo.size()) {
            throw DomainError("torus box does not match the point's manifold");
          }
          for (int a = 0; a < x.size(); ++a) {
            if (!(x[a] >= reg.lo[a] && x[a] < reg.hi[a])) return false;
          }
          return true;
        } else {
          if (!x.manifold().is_sphere()) throw DomainError("sphere cap on a non-sphere point");
          const double dx = x[0] - reg.center[0], dy = x[1] - reg.center[1], dz = x[2] - reg.center[2];
          return dx * dx + dy * dy + dz * dz < reg.chordal_radius * reg.chordal_radius;
        }
      },
      r);
}

double chordal_distance_to_equator(const Point& x) {
  const double rho = std::hypot(x[0], x[1]);
  return std::hypot(rho - 1.0, x[2]);
}

// =============================================================================
// Operations
// =============================================================================

double pushforward_eval(const MapHandle& f, const TestFunction& eta, const Point& x) {
  double s = 0.0;
  for (const Preimage& z : f.preimages(x)) s += z.index * eta(z.point);
  return s;
}

EmpiricalMeasure pullback(const MapHandle& f, const EmpiricalMeasure& mu) {
  if (!(mu.manifold() == f.manifold())) throw DomainError("pullback: measure on the wrong manifold");
  EmpiricalMeasure out(mu.manifold());
  out.reserve(mu.size() * static_cast<std::size_t>(f.degree()));
  std::vector<Preimage> pre;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    f.preimages_into(mu.atom(i), pre);
    for (const Preimage& z : pre) out.add(z.point, mu.weight(i) * z.index);
  }
  return out;
}

EmpiricalMeasure balanced_iterate(const MapHandle& f, int k, std::size_t m, const SeedStream& rng,
                                  const BalancedOptions& opts) {
  if (k < 0 || m < 1) throw DomainError("balanced_iterate: need k >= 0 and m >= 1");
  const ManifoldId& man = f.manifold();
  if (k == 0) return EmpiricalMeasure::uniform_cloud(man, m, rng);

  const double deg = f.degree();
  const double leaves_d = std::pow(deg, k);
  if (static_cast<double>(m) * leaves_d > static_cast<double>(opts.atom_cap)) {
    std::ostringstream os;
    os << "atom budget exceeded: m * deg^k = " << m << " * " << f.degree() << "^" << k
       << " > cap " << opts.atom_cap << "; use a smaller k or m";
    throw BudgetError(os.str());
  }
  const std::size_t leaves = static_cast<std::size_t>(leaves_d);
  const std::size_t amb = man.ambient_dim();
  const double norm = 1.0 / (static_cast<double>(m) * leaves_d);

  EmpiricalMeasure mu(man);
  auto& coords = mu.mutable_coords();
  auto& weights = mu.mutable_weights();
  coords.assign(m * leaves * amb, 0.0);
  // Unused slots (trees that hit a branch point) keep weight -1 and are compacted below.
  weights.assign(m * leaves, -1.0);

  parallel_for(m, [&](std::size_t i) {
    SeedStream s = rng.split(i);
    std::vector<std::pair<Point, double>> level{{geometry::sample_uniform(man, s), 1.0}};
    std::vector<std::pair<Point, double>> next;
    std::vector<Preimage> pre;
    for (int depth = 0; depth < k; ++depth) {
      next.clear();
      for (const auto& [p, w] : level) {
        f.preimages_into(p, pre);
        for (const Preimage& z : pre) next.emplace_back(z.point, w * z.index);
      }
      level.swap(next);
    }
    const std::size_t base = i * leaves;
    for (std::size_t j = 0; j < level.size(); ++j) {
      std::copy_n(level[j].first.coords().begin(), amb,
                  coords.begin() + static_cast<std::ptrdiff_t>((base + j) * amb));
      weights[base + j] = level[j].second * norm;
    }
  });

  std::size_t write = 0;
  for (std::size_t read = 0; read < weights.size(); ++read) {
    if (weights[read] < 0.0) continue;
    if (write != read) {
      weights[write] = weights[read];
      std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(read * amb), amb,
                  coords.begin() + static_cast<std::ptrdiff_t>(write * amb));
    }
    ++write;
  }
  weights.resize(write);
  coords.resize(write * amb);
  return mu;
}

double integrate(const EmpiricalMeasure& mu, const TestFunction& eta) {
  return blocked_sum(mu.size(), [&](std::size_t i) { return mu.weight(i) * eta(mu.atom(i)); });
}

double box_mass(const EmpiricalMeasure& mu, const Region& region) {
  return blocked_sum(mu.size(),
                     [&](std::size_t i) { return contains(region, mu.atom(i)) ? mu.weight(i) : 0.0; });
}

std::vector<double> grid_box_masses(const EmpiricalMeasure& mu, int side) {
  const ManifoldId& m = mu.manifold();
  if (!m.is_torus() || side < 1) throw DomainError("grid_box_masses: torus and side >= 1 required");
  std::size_t boxes = 1;
  for (int a = 0; a < m.dim; ++a) boxes *= static_cast<std::size_t>(side);
  return blocked_sum_vec(mu.size(), boxes, [&](std::size_t i, std::span<double> sum) {
    const auto c = mu.raw_coords(i);
    std::size_t cell = 0, stride = 1;
    for (int a = 0; a < m.dim; ++a) {
      cell += static_cast<std::size_t>(std::min(side - 1, static_cast<int>(c[a] * side))) * stride;
      stride *= static_cast<std::size_t>(side);
    }
    sum[cell] += mu.weight(i);
  });
}

double equator_band_mass(const EmpiricalMeasure& mu, double chordal_r) {
  if (!mu.manifold().is_sphere()) throw DomainError("equator_band_mass: sphere only");
  return blocked_sum(mu.size(), [&](std::size_t i) {
    return chordal_distance_to_equator(mu.atom(i)) < chordal_r ? mu.weight(i) : 0.0;
  });
}

double pole_cap_mass(const EmpiricalMeasure& mu, double chordal_r) {
  if (!mu.manifold().is_sphere()) throw DomainError("pole_cap_mass: sphere only");
  const SphereCap north{Point::sphere(0, 0, 1), chordal_r};
  const SphereCap south{Point::sphere(0, 0, -1), chordal_r};
  return box_mass(mu, north) + box_mass(mu, south);
}

ResidualReport balancedness_residual(const MapHandle& f, const EmpiricalMeasure& mu,
                                     const TestFamily& family) {
  if (!(mu.manifold() == f.manifold())) {
    throw DomainError("balancedness_residual: measure on the wrong manifold");
  }
  const std::size_t t = family.size();
  // acc[0..t) = int f_* eta dmu, acc[t..2t) = int eta dmu
  const std::vector<double> acc = blocked_sum_vec(mu.size(), 2 * t, [&](std::size_t i, std::span<double> sum) {
    thread_local std::vector<Preimage> pre;
    const Point x = mu.atom(i);
    const double w = mu.weight(i);
    family.accumulate(x, w, sum.subspan(t));
    f.preimages_into(x, pre);
    for (const Preimage& z : pre) family.accumulate(z.point, w * z.index, sum.first(t));
  });
  ResidualReport rep;
  rep.per_test.resize(t);
  const double deg = f.degree();
  for (std::size_t j = 0; j < t; ++j) {
    rep.per_test[j] = std::abs(acc[j] - deg * acc[t + j]) / (deg * family.sup_abs(j));
    if (rep.per_test[j] > rep.residual) {
      rep.residual = rep.per_test[j];
      rep.worst = j;
    }
  }
  return rep;
}

}  // namespace uqr::measures
