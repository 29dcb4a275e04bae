// Counter-based random streams. A stream is fully determined by
// (seed, stream id); draw i is a pure function of (seed, stream, i), so work
// split across threads reproduces the sequential draws exactly.
#pragma once

#include <cstdint>
#include <limits>

namespace shrink {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return splitmix64(key_ + splitmix64(counter_++));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  /// 128 uniform bits, the fixed-point torus coordinate x = X / 2^128.
  unsigned __int128 bits128() noexcept {
    const auto hi = static_cast<unsigned __int128>((*this)());
    return (hi << 64) | (*this)();
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace shrink
