#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstring>
#include <functional>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

namespace protograv {

// Worker count for site-parallel loops. Outputs are written to disjoint
// slots and reductions always run over stored arrays with a fixed tree, so
// results are independent of this setting.
inline std::atomic<int>& worker_threads() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_worker_threads(int n) { worker_threads() = n < 1 ? 1 : n; }

template <class F>
void parallel_for(int count, F&& body) {
  const int workers = worker_threads().load();
  if (workers <= 1 || count < 2 * workers) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Elementwise helpers treating trivially-copyable value types as flat double
// storage. Every field element used here (arrays of double, std::complex
// pairs, 4x4 matrix blocks) satisfies this layout.
template <class T>
inline constexpr std::size_t double_count() {
  static_assert(std::is_trivially_copyable_v<T>);
  static_assert(sizeof(T) % sizeof(double) == 0);
  return sizeof(T) / sizeof(double);
}

template <class T>
inline void set_zero(T& y) {
  std::memset(&y, 0, sizeof(T));
}

template <class T>
inline void axpy(T& y, double a, const T& x) {
  auto* py = reinterpret_cast<double*>(&y);
  const auto* px = reinterpret_cast<const double*>(&x);
  for (std::size_t i = 0; i < double_count<T>(); ++i) py[i] += a * px[i];
}

template <class T>
inline void scale(T& y, double a) {
  auto* py = reinterpret_cast<double*>(&y);
  for (std::size_t i = 0; i < double_count<T>(); ++i) py[i] *= a;
}

// Deterministic pairwise (fixed-tree) summation; result is independent of any
// site-loop parallelisation because reductions always run over a stored array.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() == 0) return 0.0;
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v.data(), v.size()));
}

}  // namespace protograv
