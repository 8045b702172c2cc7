#include "uqr/rng.hpp"

#include <cmath>
#include <numbers>

namespace uqr {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

SeedStream::SeedStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + kGolden))) {}

SeedStream::result_type SeedStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double SeedStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double SeedStream::normal() {
  // Box-Muller; consumes exactly two draws so stream positions stay predictable.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeedStream SeedStream::split(std::uint64_t index) const {
  return SeedStream(mix64(key_ ^ mix64(index * kGolden + 0x632be59bd9b4e019ULL)), 0, 0);
}

}  // namespace uqr
