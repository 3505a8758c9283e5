#pragma once

#include <array>
#include <cstdint>

namespace negadapt {

// Philox4x32-10 counter-based generator. A (seed, stream) pair selects an
// independent sequence; the block counter advances by one per refill, so any
// draw is a pure function of (seed, stream, position). Datasets regenerate
// identically on any platform from their manifest seed alone.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double next_double();

  // Standard normal via Box-Muller; even/odd draws come from one (u1, u2)
  // pair in a fixed call order.
  double next_gaussian();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_;
  int cursor_ = 4;
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

}  // namespace negadapt
