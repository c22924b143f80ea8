#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace evbs {

// xoshiro256** seeded through splitmix64. Integer-only state transitions,
// so a seed reproduces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1); 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  // Independent stream for replica `index` (seed XOR index, re-mixed).
  static Rng stream(std::uint64_t base, std::uint64_t index) { return Rng(base ^ index); }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace evbs
