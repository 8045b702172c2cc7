#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace uqr {

/// Caps worker threads used by parallel_for. 0 restores the default
/// (hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) across the configured workers. Results must be
/// written to per-index slots; the first exception thrown by any body is
/// rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation in a fixed tree over the input order, so the
/// result never depends on how the values were produced.
double pairwise_sum(std::span<const double> values);

/// Element-wise pairwise reduction of equally sized partial vectors.
std::vector<double> pairwise_sum_rows(const std::vector<std::vector<double>>& rows);

}  // namespace uqr

namespace uqr {

/// Deterministic blocked reduction: fn(i) summed sequentially inside blocks of
/// kReduceBlock items, block sums combined pairwise. Independent of worker count.
inline constexpr std::size_t kReduceBlock = 4096;

double blocked_sum(std::size_t n, const std::function<double(std::size_t)>& fn);

/// Vector-valued variant: fn(i, acc) adds item i's contribution into acc
/// (length `width`).
std::vector<double> blocked_sum_vec(std::size_t n, std::size_t width,
                                    const std::function<void(std::size_t, std::span<double>)>& fn);

}  // namespace uqr
