#include "uqr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace uqr {

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) { g_threads = n; }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> pairwise_sum_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t width = rows.front().size();
  std::vector<double> out(width);
  std::vector<double> column(rows.size());
  for (std::size_t j = 0; j < width; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][j];
    out[j] = pairwise_sum(column);
  }
  return out;
}

}  // namespace uqr

namespace uqr {

double blocked_sum(std::size_t n, const std::function<double(std::size_t)>& fn) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock, hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += fn(i);
    partial[b] = s;
  });
  return pairwise_sum(partial);
}

std::vector<double> blocked_sum_vec(std::size_t n, std::size_t width,
                                    const std::function<void(std::size_t, std::span<double>)>& fn) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(width, 0.0));
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock, hi = std::min(n, lo + kReduceBlock);
    for (std::size_t i = lo; i < hi; ++i) fn(i, partial[b]);
  });
  if (blocks == 0) return std::vector<double>(width, 0.0);
  return pairwise_sum_rows(partial);
}

}  // namespace uqr
