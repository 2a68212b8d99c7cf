#pragma once

#include <cstdint>
#include <random>

namespace wss {

// SplitMix64 finalizer; used to derive independent per-replicate seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// A value-typed random stream. Streams derived from the same (seed, index)
// pair produce identical sequences regardless of the order in which they
// are created, which makes replicate results independent of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  RngStream(std::uint64_t master_seed, std::uint64_t index)
      : engine_(derive(master_seed, index)) {}

  // Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  double normal();

  // Child stream keyed by an integer tag.
  RngStream split(std::uint64_t tag);

  std::mt19937_64& engine() { return engine_; }

  static std::uint64_t derive(std::uint64_t master_seed, std::uint64_t index) noexcept;

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wss
