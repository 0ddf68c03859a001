#pragma once

#include <cstdint>
#include <limits>

namespace offtd {

/// Independent random streams derived from one experiment seed. Every
/// consumer draws from its own (seed, stream, index) key, so the numbers a
/// consumer sees never depend on how many draws another consumer made or on
/// which thread ran first.
enum class Stream : std::uint64_t {
  kGarnet = 1,
  kPolicy = 2,
  kTrajectory = 3,
  kStartState = 4,
  kProbe = 5,
  kLinearSa = 6,
  kProblem = 7,
};

/// Counter-based generator: output i is splitmix64(key + i * golden).
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
      : key_(derive_key(seed, stream, index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  /// Uniform double in (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t derive_key(std::uint64_t seed, Stream stream,
                                            std::uint64_t index) {
    std::uint64_t k = mix(seed + kGolden);
    k = mix(k ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
    return mix(k ^ (index * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace offtd
