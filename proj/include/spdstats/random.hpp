#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace spdstats {

/// Counter-based generator: the k-th draw of a stream is
/// splitmix64_mix(key + k * golden_gamma), so any draw can be reproduced
/// from (key, k) alone and output is identical on every platform.
///
/// Stream split rule: Rng::stream(seed, purpose, index) derives
/// key = mix(mix(seed) ^ mix(purpose * C1 + index * C2 + 1)). Every
/// randomized operation takes its own purpose tag, and repeated draws inside
/// an operation (epochs, permutations, replicates) use their index.
class Rng {
 public:
  enum class Purpose : std::uint64_t {
    kShuffle = 1,
    kNormal = 2,
    kPermutation = 3,
    kGeneric = 4,
  };

  explicit Rng(std::uint64_t key) noexcept : key_(key) {}

  static Rng stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  /// Uniform integer in [0, n) by Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t z) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace spdstats
