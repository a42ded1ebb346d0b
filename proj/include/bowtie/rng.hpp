#ifndef BOWTIE_RNG_HPP
#define BOWTIE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace bowtie {

// Deterministic RNG used everywhere seeds appear. Hand-rolled draw helpers so
// that results are reproducible bit-for-bit across standard libraries; the
// std:: distributions are implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // a couple of warm-up mixes so nearby seeds decorrelate
    next_u64();
    next_u64();
  }

  // splitmix64 step
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); n > 0
  std::uint64_t next_below(std::uint64_t n) {
    // multiply-shift; bias is < 2^-64 per draw and fully deterministic
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  double normal() {
    // Box-Muller, cached second value
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Knuth's product method; fine for the moderate means used in simulations
  std::uint64_t poisson(double mean) {
    double limit = std::exp(-mean);
    double prod = next_double();
    std::uint64_t k = 0;
    while (prod > limit) {
      prod *= next_double();
      ++k;
    }
    return k;
  }

  // in-place Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Stable seed derivation for sub-streams (per tree, per fold, per stage);
// serial and parallel execution draw from identical streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace bowtie

#endif
