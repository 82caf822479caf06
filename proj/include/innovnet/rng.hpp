#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace innovnet {

// Identifier written into run metadata so trajectories carry their exact
// randomness recipe.
inline constexpr std::string_view kGeneratorId =
    "mt19937_64/splitmix64-derive/canonical53";

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic uniform stream.  Streams for replicate experiments are derived
// from (master_seed, index) through two rounds of splitmix64, which decorrelates
// low-entropy master seeds and consecutive indices.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  static RngStream derive(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t s = master_seed;
    const std::uint64_t mixed = splitmix64(s);
    std::uint64_t s2 = mixed ^ (0x94D049BB133111EBULL * (index + 1));
    return RngStream(splitmix64(s2));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0,1) with 53-bit resolution.  Spelled out rather than using
  // uniform_real_distribution so the value sequence is pinned across standard
  // library implementations.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace innovnet
