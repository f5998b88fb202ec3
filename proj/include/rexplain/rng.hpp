#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rexplain {

// Deterministic random source. mt19937_64 output is pinned by the standard,
// but the std distributions are not, so the draw helpers below are our own.
// Identical seeds give identical streams on every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (spare value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

  // Weighted index draw; weights need not be normalized. Entries with zero
  // weight are never returned (assuming at least one positive entry).
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      total += weights[i];
      if (weights[i] > 0.0) last_positive = i;
    }
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0.0 && weights[i] > 0.0) return i;
    }
    return last_positive;  // guards against floating-point tail
  }

  // Independent child stream; mixing is splitmix64-style so streams derived
  // from (seed, index) do not collide for nearby indices.
  Rng child(std::uint64_t stream) const {
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

private:
  std::mt19937_64 gen_;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives a fresh deterministic stream from a master seed and stream id.
inline Rng stream_rng(std::uint64_t master_seed, std::uint64_t stream) {
  return Rng(master_seed).child(stream);
}

}  // namespace rexplain
