#include "porl/rng.h"

#include <cmath>
#include <stdexcept>

namespace porl {

// splitmix64 finalizer; also used to whiten seeds before feeding mt19937_64.
static std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  // Box-Muller with u1 in (0, 1]; one pair of uniforms per draw.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t SeededRng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::size_t SeededRng::uniform_int(std::size_t lo, std::size_t hi) {
  return lo + uniform_index(hi - lo + 1);
}

SeededRng SeededRng::child(std::uint64_t tag) const {
  return SeededRng(mix64(seed_ ^ mix64(tag)));
}

Tensor gaussian(SeededRng& rng, std::vector<std::size_t> shape, double std_dev) {
  if (std_dev < 0.0) throw std::invalid_argument("gaussian: negative std");
  Tensor t(std::move(shape));
  if (std_dev == 0.0) return t;
  for (auto& v : t.data) v = std_dev * rng.normal();
  return t;
}

}  // namespace porl
