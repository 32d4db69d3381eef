#pragma once
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <functional>
#include <thread>
#include <vector>

#include "core.hpp"

namespace coronalab {

// Philox4x32-10 block cipher. Output depends only on (key, counter).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : k0_(static_cast<std::uint32_t>(key)), k1_(static_cast<std::uint32_t>(key >> 32)) {}

  Block operator()(Block ctr) const {
    std::uint32_t k0 = k0_, k1 = k1_;
    for (int r = 0; r < 10; ++r) {
      std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  std::uint32_t k0_, k1_;
};

// One independent stream per (seed, stream id); draws are indexed, never shared.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : philox_(mix64(seed)), stream_(stream) {}

  std::uint64_t next_u64() {
    if (have_ == 0) {
      block_ = philox_({static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32),
                        static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32)});
      ++draw_;
      have_ = 2;
    }
    --have_;
    int i = have_ == 1 ? 0 : 2;
    return (std::uint64_t{block_[i]} << 32) | block_[i + 1];
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double normal() {
    double u1 = uniform_open0(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Point direction(int dim) {
    if (dim == 2) {
      double t = 2.0 * kPi * uniform();
      return {std::cos(t), std::sin(t), 0.0};
    }
    double z = 2.0 * uniform() - 1.0;
    double t = 2.0 * kPi * uniform();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(t), r * std::sin(t), z};
  }

 private:
  Philox4x32 philox_;
  std::uint64_t stream_;
  std::uint64_t draw_ = 0;
  Philox4x32::Block block_{};
  int have_ = 0;
};

// CORONALAB_THREADS overrides the hardware thread count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("CORONALAB_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs body(i) for i in [0, n). Work is split into fixed chunks so that any
// reduction done per index is independent of the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         std::size_t chunk = 256) {
  unsigned workers = worker_count();
  if (workers <= 1 || n <= chunk) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t chunks = (n + chunk - 1) / chunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    try {
      for (std::size_t c = next++; c < chunks; c = next++) {
        std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) body(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = chunks;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < std::min<std::size_t>(workers, chunks); ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace coronalab
