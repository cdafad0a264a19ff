#ifndef CERTOPT_PARALLEL_HPP_
#define CERTOPT_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace certopt {

/// Runs fn(i) for i in [0, n) over a static contiguous partition. Callers
/// write into disjoint slots, so results do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::clamp<std::size_t>(threads > 0 ? static_cast<std::size_t>(threads) : 1, 1, std::max<std::size_t>(n, 1));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t w = 0; w < t; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi)
      break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i)
          fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
      }
    });
  }
  for (auto& th : pool)
    th.join();
  if (error)
    std::rethrow_exception(error);
}

/// Pairwise (tree) summation; the order is fixed by the input order.
template <class T>
T pairwise_sum(const T* x, std::size_t n) {
  if (n == 0)
    return T{};
  if (n <= 8) {
    T s = x[0];
    for (std::size_t i = 1; i < n; ++i)
      s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace certopt

#endif  // CERTOPT_PARALLEL_HPP_
