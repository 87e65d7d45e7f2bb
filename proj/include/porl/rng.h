#pragma once

#include <cstdint>
#include <random>

#include "porl/tensor.h"

namespace porl {

// Deterministic seeded randomness. Gaussian draws use our own Box-Muller on
// top of mt19937_64 so value streams are identical across platforms and
// standard libraries (std::normal_distribution is implementation-defined).
//
// Child streams are derived from the construction seed only (never from the
// stream position), so `r.child(k)` is stable no matter how much of `r` has
// been consumed. Derived streams are the backbone of the reproducibility
// contract: every independently parallelizable unit of work (per-sample, per
// training step, per episode) draws from its own child.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return eng_(); }

  double uniform();                      // [0, 1)
  double normal();                       // N(0, 1), Box-Muller
  std::size_t uniform_index(std::size_t n);        // {0, ..., n-1}
  std::size_t uniform_int(std::size_t lo, std::size_t hi);  // inclusive range

  SeededRng child(std::uint64_t tag) const;
  SeededRng child2(std::uint64_t a, std::uint64_t b) const { return child(a).child(b); }
  SeededRng child3(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return child(a).child(b).child(c);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

// i.i.d. N(0, std^2) values; std = 0 yields the zero tensor without touching
// the stream. Negative std is rejected.
Tensor gaussian(SeededRng& rng, std::vector<std::size_t> shape, double std_dev);

}  // namespace porl
