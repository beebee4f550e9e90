#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace glpp {

/// SplitMix64 step; the backbone of seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed-splitting rule: every subsystem draws its seed from
/// (master, stream-id) so runs are reproducible per module.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_id) {
  std::uint64_t s = master ^ fnv1a64(stream_id);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_id,
                                 std::uint64_t index) {
  std::uint64_t s = master ^ fnv1a64(stream_id);
  s += 0x632be59bd9b4e019ULL * (index + 1);
  return splitmix64(s);
}

/// Deterministic generator used everywhere. xoshiro-free: a SplitMix64
/// stream is enough at this scale and keeps results identical across
/// standard libraries (std::normal_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  /// Standard normal via Box-Muller; one value per call, no cached spare,
  /// so the draw sequence is position-independent.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace glpp
