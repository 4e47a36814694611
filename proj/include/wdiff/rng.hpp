#pragma once

#include <cstdint>
#include <string_view>

namespace wdiff {

// Counter-based generator: the k-th 64-bit draw is splitmix64(seed + k * golden).
// Normals come from Box-Muller on consecutive uniform pairs, so a stream is
// reproducible from (seed, position) alone.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform in (0, 1); never returns 0.
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derive an independent stream seed from a base seed and a purpose tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace wdiff
