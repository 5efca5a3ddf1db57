#pragma once

#include <array>
#include <cstdint>

namespace superexp {

/// Counter-based generator (Philox 4x32-10). A (seed, stream) pair selects an
/// independent sequence, so parallel work keyed by stream index reproduces
/// the sequential result exactly.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal by Box-Muller; pairs are cached.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace superexp
