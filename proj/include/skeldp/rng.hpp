#pragma once

#include <array>
#include <cstdint>

namespace skeldp {

/**
 * Philox4x32-10 counter-based generator.
 *
 * A generator is identified by (seed, stream). The 64-bit seed is the Philox
 * key; the stream id occupies the upper half of the 128-bit counter and the
 * lower half counts blocks, so distinct streams never share a block. Monte
 * Carlo path i always draws from stream i, which makes results independent of
 * how paths are distributed over workers.
 */
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// The raw 10-round bijection.
  static Block encrypt(Block counter, Key key) noexcept;

 private:
  void refill() noexcept;

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int used_ = 4;  // 64-bit words consumed from buffer_ (0, 2 or 4 halves)
};

/// splitmix64 finalizer; used to derive independent seeds for separate phases.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// Uniform on the open interval (0, 1): 52 random bits at cell midpoints, so
/// the extremes 2^-53 and 1 - 2^-53 are exactly representable.
template <class Rng>
double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 12) + 0.5) * 0x1.0p-52;
}

/// Seed-derivation tags for the phases of an experiment.
namespace stream_tag {
inline constexpr std::uint64_t kTraining = 0x7472616931ULL;
inline constexpr std::uint64_t kExploration = 0x6578706c31ULL;
inline constexpr std::uint64_t kEvaluation = 0x6576616c31ULL;
}  // namespace stream_tag

}  // namespace skeldp
