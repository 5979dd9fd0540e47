#pragma once

// Internal helpers shared by the stochastic engine and the orientation module.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace opo::detail {

// Independent stream per (seed, trajectory). Parallel execution order
// therefore cannot change any trajectory.
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t traj_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(traj_index),
                    static_cast<std::uint32_t>(traj_index >> 32), 0x4f504f31u};
  return std::mt19937_64(seq);
}

// Runs body(i, worker) for i in [0, n) on up to `threads` workers, where
// worker < threads identifies the calling worker. The first exception thrown
// by any body is rethrown after all workers have joined.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&](unsigned id) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i, id);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker, t);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// Neumaier summation; reductions always run in index order.
template <class T>
class CompensatedSum {
 public:
  void add(T value) {
    const T t = sum_ + value;
    comp_ += correction(sum_, value, t);
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  static double correction(double s, double v, double t) {
    return std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
  }
  static std::complex<double> correction(std::complex<double> s, std::complex<double> v,
                                         std::complex<double> t) {
    return {correction(s.real(), v.real(), t.real()), correction(s.imag(), v.imag(), t.imag())};
  }

  T sum_{};
  T comp_{};
};

struct MeanAndError {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanAndError mean_and_stderr(const std::vector<double>& values) {
  MeanAndError out;
  if (values.empty()) return out;
  CompensatedSum<double> sum;
  for (double v : values) sum.add(v);
  out.mean = sum.value() / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  CompensatedSum<double> sq;
  for (double v : values) sq.add((v - out.mean) * (v - out.mean));
  const double var = sq.value() / static_cast<double>(values.size() - 1);
  out.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace opo::detail
