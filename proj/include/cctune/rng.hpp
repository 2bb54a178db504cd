#pragma once

#include <array>
#include <cstdint>

namespace cctune {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (counter, key), so any sample index can be drawn
/// independently of every other one.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

/// Identifies the random stream layout. Bump when the mapping from
/// (seed, index) to variates changes, so stored results stay attributable.
inline constexpr const char* kRngName = "philox4x32-10/v1";

/// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for replication `index` of stream `stream` under `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

/// Sequential variates for one sample index: successive Philox blocks with
/// counter (index_lo, index_hi, block, 0) under key = seed.
class VariateStream {
 public:
  VariateStream(std::uint64_t seed, std::uint64_t index);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double next_uniform();
  /// Standard normal via Box-Muller; pairs are consumed together.
  double next_normal();

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cctune
