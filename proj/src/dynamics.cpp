#include "uqr/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "uqr/errors.hpp"
#include "uqr/parallel.hpp"

namespace uqr::dynamics {

using geometry::kMaxTorusDim;

double operator_norm(const Matrix& m) {
  if (m.rows() == 2 && m.cols() == 2) {
    // Closed form for 2x2: sigma_max = (sqrt((a+d)^2+(c-b)^2) + sqrt((a-d)^2+(b+c)^2)) / 2.
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    return 0.5 * (std::hypot(a + d, c - b) + std::hypot(a - d, b + c));
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const Matrix& m) {
  if (m.rows() == 2 && m.cols() == 2) {
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    return 0.5 * std::abs(std::hypot(a + d, c - b) - std::hypot(a - d, b + c));
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

long long integer_determinant(const IntMatrix& a) {
  const auto n = a.rows();
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  long long det = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    IntMatrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = a(r, c);
      }
    }
    const long long term = a(0, j) * integer_determinant(minor);
    det += (j % 2 == 0) ? term : -term;
  }
  return det;
}

namespace {

IntMatrix integer_adjugate(const IntMatrix& a) {
  const auto n = a.rows();
  IntMatrix adj(n, n);
  if (n == 1) {
    adj(0, 0) = 1;
    return adj;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      IntMatrix minor(n - 1, n - 1);
      Eigen::Index rr = 0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == i) continue;
        Eigen::Index cc = 0;
        for (Eigen::Index c = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = a(r, c);
        }
        ++rr;
      }
      const long long cof = integer_determinant(minor) * (((i + j) % 2 == 0) ? 1 : -1);
      adj(j, i) = cof;
    }
  }
  return adj;
}

}  // namespace

// =============================================================================
// ToralEndo
// =============================================================================

ToralEndo::ToralEndo(IntMatrix a) : a_(std::move(a)) {
  const auto n = a_.rows();
  if (a_.cols() != n) throw DomainError("toral endomorphism needs a square matrix");
  manifold_ = ManifoldId::torus(static_cast<int>(n));
  const long long det = integer_determinant(a_);
  if (det == 0) throw DomainError("degree undefined: singular matrix");
  if (std::llabs(det) > (1LL << 30)) throw DomainError("toral endomorphism degree too large");
  degree_ = static_cast<int>(std::llabs(det));
  a_real_ = a_.cast<double>();
  a_inv_ = a_real_.inverse();

  // Cosets of A Z^n: integer v inside the half-open parallelepiped A [0,1)^n.
  // Membership is decided exactly: adj(A) v / det in [0,1)^n.
  const IntMatrix adj = integer_adjugate(a_);
  std::array<long long, kMaxTorusDim> lo{}, hi{};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lo[i] += std::min(0LL, a_(i, j));
      hi[i] += std::max(0LL, a_(i, j));
    }
  }
  std::array<long long, kMaxTorusDim> v = lo;
  for (;;) {
    bool inside = true;
    for (Eigen::Index i = 0; i < n && inside; ++i) {
      long long w = 0;
      for (Eigen::Index j = 0; j < n; ++j) w += adj(i, j) * v[j];
      inside = det > 0 ? (w >= 0 && w < det) : (w <= 0 && w > det);
    }
    if (inside) cosets_.push_back(v);
    Eigen::Index axis = 0;
    while (axis < n && ++v[axis] > hi[axis]) {
      v[axis] = lo[axis];
      ++axis;
    }
    if (axis == n) break;
  }
  if (static_cast<long long>(cosets_.size()) != std::llabs(det)) {
    throw InternalError("coset enumeration found " + std::to_string(cosets_.size()) +
                        " representatives, expected |det A| = " + std::to_string(std::llabs(det)));
  }
  for (const auto& c : cosets_) {
    std::array<double, kMaxTorusDim> off{};
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) off[i] += a_inv_(i, j) * static_cast<double>(c[j]);
    }
    offsets_.push_back(off);
  }
}

Point ToralEndo::eval(const Point& x) const {
  const int n = manifold_.dim;
  std::array<double, kMaxTorusDim> y{};
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a_real_(i, j) * x[j];
    y[i] = s;
  }
  return Point(manifold_, std::span<const double>(y.data(), n));
}

void ToralEndo::preimages_into(const Point& y, std::vector<Preimage>& out) const {
  const int n = manifold_.dim;
  std::array<double, kMaxTorusDim> base{};
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a_inv_(i, j) * y[j];
    base[i] = s;
  }
  out.clear();
  std::array<double, kMaxTorusDim> z{};
  for (const auto& off : offsets_) {
    for (int i = 0; i < n; ++i) z[i] = geometry::wrap01(base[i] + off[i]);
    out.push_back({Point::canonical(manifold_, std::span<const double>(z.data(), n)), 1});
  }
}

double ToralEndo::distortion_bound(int k) const {
  Matrix p = Matrix::Identity(a_.rows(), a_.cols());
  for (int i = 0; i < k; ++i) p = p * a_real_;
  const double n = manifold_.dim;
  return std::pow(operator_norm(p), n) / std::pow(static_cast<double>(degree_), k);
}

// =============================================================================
// SpherePowerMap
// =============================================================================

ChartValue to_chart(const Point& p) {
  const double x = p[0], y = p[1], z = p[2];
  if (z >= 0.0) return {std::complex<double>(x, y) / (1.0 + z), false};
  return {std::complex<double>(x, -y) / (1.0 - z), true};
}

Point from_chart(const ChartValue& c) {
  const double r2 = std::norm(c.value);
  const double s = 2.0 / (1.0 + r2);
  const double z = (1.0 - r2) / (1.0 + r2);
  if (!c.south) return Point::sphere(s * c.value.real(), s * c.value.imag(), z);
  return Point::sphere(s * c.value.real(), -s * c.value.imag(), -z);
}

Point sphere_from_w(std::complex<double> w) {
  if (std::abs(w) <= 1.0) return from_chart({w, false});
  return from_chart({1.0 / w, true});
}

SpherePowerMap::SpherePowerMap(int d) : d_(d) {
  if (d < 2) throw DomainError("sphere power map needs exponent d >= 2");
}

Point SpherePowerMap::eval(const Point& x) const {
  ChartValue c = to_chart(x);
  c.value = std::pow(c.value, d_);
  return from_chart(c);
}

Matrix SpherePowerMap::differential(const Point& x) const {
  const ChartValue c = to_chart(x);
  const std::complex<double> w = c.value;
  const std::complex<double> deriv = static_cast<double>(d_) * std::pow(w, d_ - 1);
  // Spherical metric 2|dw|/(1+|w|^2); the frame change multiplies by
  // lambda(f(w)) / lambda(w).
  const double r2 = std::norm(w);
  const double scale = (1.0 + r2) / (1.0 + std::pow(r2, d_));
  Matrix m(2, 2);
  m << deriv.real(), -deriv.imag(), deriv.imag(), deriv.real();
  return scale * m;
}

void SpherePowerMap::preimages_into(const Point& y, std::vector<Preimage>& out) const {
  out.clear();
  const ChartValue c = to_chart(y);
  const double r = std::abs(c.value);
  if (r == 0.0) {
    out.push_back({from_chart(c), d_});
    return;
  }
  const double root_r = std::pow(r, 1.0 / d_);
  const double theta = std::arg(c.value) / d_;
  for (int j = 0; j < d_; ++j) {
    const double a = theta + 2.0 * std::numbers::pi * j / d_;
    out.push_back({from_chart({std::polar(root_r, a), c.south}), 1});
  }
}

int SpherePowerMap::local_index(const Point& x) const {
  return to_chart(x).value == 0.0 ? d_ : 1;
}

std::vector<Point> SpherePowerMap::branch_points() const {
  return {Point::sphere(0, 0, 1), Point::sphere(0, 0, -1)};
}

// =============================================================================
// ShearedEndo
// =============================================================================

std::string to_string(ShearProfile p) { return p == ShearProfile::sine ? "sine" : "bump"; }

ShearProfile shear_profile_from_string(const std::string& s) {
  if (s == "sine") return ShearProfile::sine;
  if (s == "bump") return ShearProfile::bump;
  throw DomainError("unknown shear profile '" + s + "' (expected sine or bump)");
}

ShearedEndo::ShearedEndo(ToralEndo base, double shear, ShearProfile profile)
    : base_(std::move(base)), shear_(shear), profile_(profile) {
  if (!(shear >= 0.0 && shear < 1.0)) {
    throw DomainError("shear amplitude must lie in [0, 1) so that h stays a diffeomorphism");
  }
}

double ShearedEndo::psi(double t) const {
  constexpr double pi = std::numbers::pi;
  if (profile_ == ShearProfile::sine) return std::sin(2.0 * pi * t) / (2.0 * pi);
  const double s = std::sin(pi * t);
  return s * s / pi;
}

double ShearedEndo::dpsi(double t) const {
  constexpr double pi = std::numbers::pi;
  return profile_ == ShearProfile::sine ? std::cos(2.0 * pi * t) : std::sin(2.0 * pi * t);
}

Point ShearedEndo::conjugacy(const Point& x) const {
  std::array<double, kMaxTorusDim> c{};
  for (int i = 0; i < x.size(); ++i) c[i] = x[i];
  c[0] += shear_ * psi(x[1]);
  return Point(x.manifold(), std::span<const double>(c.data(), x.size()));
}

Point ShearedEndo::conjugacy_inverse(const Point& y) const {
  std::array<double, kMaxTorusDim> c{};
  for (int i = 0; i < y.size(); ++i) c[i] = y[i];
  c[0] -= shear_ * psi(y[1]);
  return Point(y.manifold(), std::span<const double>(c.data(), y.size()));
}

Matrix ShearedEndo::conjugacy_differential(const Point& x) const {
  const int n = x.size();
  Matrix m = Matrix::Identity(n, n);
  m(0, 1) = shear_ * dpsi(x[1]);
  return m;
}

Point ShearedEndo::eval(const Point& x) const {
  return conjugacy(base_.eval(conjugacy_inverse(x)));
}

Matrix ShearedEndo::differential(const Point& x) const {
  const Point u = conjugacy_inverse(x);
  const Point v = base_.eval(u);
  // D(h^{-1})(x) = I - s psi'(x_2) E_12 (h^{-1} preserves x_2).
  Matrix inv = Matrix::Identity(x.size(), x.size());
  inv(0, 1) = -shear_ * dpsi(x[1]);
  return conjugacy_differential(v) * base_.differential(u) * inv;
}

void ShearedEndo::preimages_into(const Point& y, std::vector<Preimage>& out) const {
  base_.preimages_into(conjugacy_inverse(y), out);
  for (Preimage& p : out) p.point = conjugacy(p.point);
}

double ShearedEndo::conjugacy_distortion() const {
  const double a = shear_;
  const double norm = 0.5 * (a + std::sqrt(a * a + 4.0));
  return std::pow(norm, manifold().dim);
}

double ShearedEndo::distortion_bound(int k) const {
  const double kh = conjugacy_distortion();
  return kh * kh * base_.distortion_bound(k);
}

// =============================================================================
// MapHandle
// =============================================================================

MapHandle::MapHandle(ToralEndo f) : impl_(std::make_shared<const Family>(std::move(f))) {}
MapHandle::MapHandle(SpherePowerMap f) : impl_(std::make_shared<const Family>(std::move(f))) {}
MapHandle::MapHandle(ShearedEndo f) : impl_(std::make_shared<const Family>(std::move(f))) {}

MapHandle MapHandle::identity(int n) {
  return MapHandle(ToralEndo(IntMatrix::Identity(n, n)));
}

std::string MapHandle::family_name() const {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ToralEndo>) return "toral";
        else if constexpr (std::is_same_v<T, SpherePowerMap>) return "sphere_power";
        else return "sheared";
      },
      *impl_);
}

namespace {
std::string matrix_string(const IntMatrix& a) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    os << (i ? ",[" : "[");
    for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << a(i, j);
    os << ']';
  }
  os << ']';
  return os.str();
}
}  // namespace

std::string MapHandle::describe() const {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ToralEndo>) {
          return "toral A=" + matrix_string(f.matrix());
        } else if constexpr (std::is_same_v<T, SpherePowerMap>) {
          return "sphere_power d=" + std::to_string(f.exponent());
        } else {
          std::ostringstream os;
          os << "sheared A=" << matrix_string(f.base().matrix()) << " s=" << f.shear()
             << " profile=" << to_string(f.profile());
          return os.str();
        }
      },
      *impl_);
}

const ManifoldId& MapHandle::manifold() const {
  return std::visit([](const auto& f) -> const ManifoldId& { return f.manifold(); }, *impl_);
}

int MapHandle::degree() const {
  return std::visit([](const auto& f) { return f.degree(); }, *impl_);
}

Point MapHandle::eval(const Point& x) const {
  return std::visit([&](const auto& f) { return f.eval(x); }, *impl_);
}

Matrix MapHandle::differential(const Point& x) const {
  return std::visit([&](const auto& f) { return f.differential(x); }, *impl_);
}

double MapHandle::jacobian(const Point& x) const { return std::abs(differential(x).determinant()); }

std::optional<double> MapHandle::pointwise_distortion(const Point& x) const {
  const Matrix d = differential(x);
  const double j = std::abs(d.determinant());
  if (!(j > 0.0)) return std::nullopt;
  return std::pow(operator_norm(d), manifold().dim) / j;
}

std::vector<Preimage> MapHandle::preimages(const Point& y) const {
  std::vector<Preimage> out;
  preimages_into(y, out);
  return out;
}

void MapHandle::preimages_into(const Point& y, std::vector<Preimage>& out) const {
  if (!(y.manifold() == manifold())) throw DomainError("preimages: point on the wrong manifold");
  std::visit([&](const auto& f) { f.preimages_into(y, out); }, *impl_);
}

int MapHandle::local_index(const Point& x) const {
  return std::visit([&](const auto& f) { return f.local_index(x); }, *impl_);
}

std::vector<Point> MapHandle::branch_points() const {
  return std::visit([](const auto& f) { return f.branch_points(); }, *impl_);
}

double MapHandle::distortion_bound(int k) const {
  return std::visit([&](const auto& f) { return f.distortion_bound(k); }, *impl_);
}

// =============================================================================
// Orbits
// =============================================================================

ProductPoint chain_point(const MapHandle& f, const Point& x, int k) {
  if (k < 0) throw DomainError("chain_point: k must be >= 0");
  std::vector<Point> entries;
  entries.reserve(static_cast<std::size_t>(k) + 1);
  entries.push_back(x);
  for (int j = 1; j <= k; ++j) entries.push_back(f.eval(entries.back()));
  return ProductPoint(std::move(entries));
}

std::vector<Matrix> orbit_differentials(const MapHandle& f, const Point& x, int k) {
  const int n = f.manifold().dim;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(k) + 1);
  out.push_back(Matrix::Identity(n, n));
  Point p = x;
  for (int j = 1; j <= k; ++j) {
    out.push_back(f.differential(p) * out.back());
    p = f.eval(p);
  }
  return out;
}

DistortionEstimate iterate_distortion(const MapHandle& f, int k, int samples, const SeedStream& rng) {
  if (k < 1 || samples < 1) throw DomainError("iterate_distortion: need k >= 1 and samples >= 1");
  const int n = f.manifold().dim;
  std::vector<double> value(static_cast<std::size_t>(samples));
  std::vector<int> retries(static_cast<std::size_t>(samples), 0);
  parallel_for(value.size(), [&](std::size_t i) {
    SeedStream s = rng.split(i);
    for (;;) {
      const Point x = geometry::sample_uniform(f.manifold(), s);
      const Matrix d = orbit_differentials(f, x, k).back();
      const double j = std::abs(d.determinant());
      if (j > 0.0 && std::isfinite(j)) {
        value[i] = std::pow(operator_norm(d), n) / j;
        return;
      }
      ++retries[i];
    }
  });
  DistortionEstimate est;
  est.k = k;
  est.samples = samples;
  est.value = *std::max_element(value.begin(), value.end());
  for (int r : retries) est.resampled += r;
  return est;
}

}  // namespace uqr::dynamics
