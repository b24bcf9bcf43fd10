#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

namespace maskrl {

// Counter-based deterministic random stream. A draw is a pure function of
// (key, counter), so streams can be split into independent children without
// sharing state; replaying a stream from the same key reproduces every draw.
// Workers must own their stream: one Rng instance is not thread-safe.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed, 0x9e3779b97f4a7c15ULL)) {}

  std::uint64_t next_u64() { return mix(key_, ++counter_); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n == 0");
    // Rejection sampling kills the modulo bias; at most a few retries.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Draw an index from a normalized distribution of length n.
  std::size_t categorical(const double* probs, std::size_t n) {
    const double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return n - 1;  // guards against cumulative rounding
  }

  // Independent child stream. Children with distinct tags never collide,
  // and splitting does not advance this stream's counter.
  Rng split(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = mix(key_ ^ 0x94d049bb133111ebULL, tag);
    child.counter_ = 0;
    return child;
  }

 private:
  // Two finalizer rounds of splitmix64-style mixing over (key, counter).
  static std::uint64_t mix(std::uint64_t key, std::uint64_t ctr) {
    std::uint64_t z = key + 0x9e3779b97f4a7c15ULL * (ctr + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    z += key ^ (ctr << 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace maskrl
