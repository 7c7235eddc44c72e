#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace riskdiff {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based uniform stream. Draw `i` of stream `s` under seed `k` is a
/// pure function of (k, s, i), so any replicate can be regenerated without
/// replaying the others and results do not depend on scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return uniform_at(seed_, stream_, index_++); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t draws() const noexcept { return index_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  static double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
};

/// Mixes a sequence of integers into one 64-bit stream identifier.
std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept;

/// FNV-1a, used to turn scenario ids into stream components.
std::uint64_t hash_string(std::string_view s) noexcept;

}  // namespace riskdiff
