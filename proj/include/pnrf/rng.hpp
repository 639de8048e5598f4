#pragma once

#include <cstdint>
#include <utility>

namespace pnrf {

// PCG32: small deterministic generator with a serializable 2x u64 state.
// Used everywhere instead of <random> so that streams are reproducible
// across standard library versions and resumable from checkpoints.
class Pcg32 {
 public:
  Pcg32() : Pcg32(0x853c49e6748fea9bULL) {}
  explicit Pcg32(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
  }

  // Uniform in [0, 1) with 32 bits of entropy; enough for sampling jitter.
  double uniform() { return next_u32() * 0x1.0p-32; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Modulo bias is irrelevant at the
  // range sizes used here (image dims, frame counts).
  int uniform_int(int n) { return static_cast<int>(next_u32() % static_cast<uint32_t>(n)); }

  std::pair<uint64_t, uint64_t> state() const { return {state_, inc_}; }
  void set_state(uint64_t state, uint64_t inc) {
    state_ = state;
    inc_ = inc;
  }

 private:
  uint64_t state_;
  uint64_t inc_;
};

}  // namespace pnrf
