#pragma once

#include <cstdint>
#include <random>

namespace bevguard {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

/// Seeded random stream. Passed explicitly to every stochastic operation.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (stddev <= 0.0) return mean;
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [lo, hi].
  long long integer(long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(engine_);
  }
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
};

}  // namespace bevguard
