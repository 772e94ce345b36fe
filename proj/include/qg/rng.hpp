#pragma once

#include <cstdint>
#include <vector>

namespace qg {

// Deterministic random stream backed by SplitMix64 (Steele, Lea & Flood 2014).
// Pure 64-bit integer arithmetic, so a given seed yields the same sample
// sequence on every platform. split() derives an independent child stream,
// which is how each randomized component (init, shuffling, dropout masks)
// gets its own reproducible source from one top-level seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with full 53-bit mantissa resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Modulo bias is < 2^-53 for the n used here.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  RngStream split() { return RngStream(next_u64()); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace qg
