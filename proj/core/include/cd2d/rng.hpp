#pragma once

#include <cstdint>

namespace cd2d {

// Splitmix64 generator. Hand-rolled so traces are byte-identical across
// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Derive an independent stream tied to (seed, stream id).
  static Rng stream(std::uint64_t seed, std::uint64_t id) {
    Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (id + 1)));
    mix.next();
    return mix;
  }

 private:
  std::uint64_t state_;
};

}  // namespace cd2d
