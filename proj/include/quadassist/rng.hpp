#pragma once

#include <cstdint>
#include <random>

namespace quadassist {

// mt19937_64 output is fixed by the standard; the distributions in <random>
// are not, so uniform and gaussian draws are derived by hand.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in (0, 1].
  double uniform() {
    ++draws_;
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (two uniforms per sample, no caching).
  double gaussian();

  std::uint64_t draws() const noexcept { return draws_; }

  bool operator==(const DeterministicRng& other) const {
    return engine_ == other.engine_ && draws_ == other.draws_;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace quadassist
