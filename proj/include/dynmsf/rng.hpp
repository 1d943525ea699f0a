#pragma once

#include <cstdint>
#include <random>

namespace dynmsf {

// splitmix64: used to derive independent streams from one master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One master seed per run; every randomized operation draws from its own
// stream keyed by (operation id, trial index) so that reordering or skipping
// operations does not perturb unrelated draws.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed) {}

  std::mt19937_64 stream(uint64_t op, uint64_t trial = 0) const {
    uint64_t s = splitmix64(seed_ ^ splitmix64(op ^ splitmix64(trial)));
    return std::mt19937_64(s);
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
};

}  // namespace dynmsf
