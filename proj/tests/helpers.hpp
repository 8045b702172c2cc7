#pragma once

#include <initializer_list>

#include "uqr/dynamics.hpp"

namespace uqr::test {

inline dynamics::MapHandle toral(std::initializer_list<std::initializer_list<long long>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  dynamics::IntMatrix a(n, n);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (long long v : r) a(i, j++) = v;
    ++i;
  }
  return dynamics::ToralEndo(a);
}

inline dynamics::MapHandle doubling() { return toral({{2, 0}, {0, 2}}); }

inline dynamics::MapHandle sheared(double s = 0.1, dynamics::ShearProfile p = dynamics::ShearProfile::sine) {
  dynamics::IntMatrix a(2, 2);
  a << 2, 0, 0, 2;
  return dynamics::ShearedEndo(dynamics::ToralEndo(a), s, p);
}

inline dynamics::MapHandle power(int d) { return dynamics::SpherePowerMap(d); }

}  // namespace uqr::test
