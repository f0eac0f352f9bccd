#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dmem {

// Named, seedable 64-bit generator (splitmix64). Instances are value types;
// split() derives an independent stream keyed by a label so each module can
// own its randomness without coupling call order between modules.
class Rng {
 public:
  explicit Rng(uint64_t seed = 42) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; draws a fresh pair each call so the stream stays stateless.
  double gaussian(double mean, double stddev) {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586 * u2);
  }

  // Unbiased-enough for shuffling small corpora.
  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  Rng split(std::string_view label) const {
    uint64_t h = 1469598103934665603ULL ^ state_;
    for (char c : label) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ULL;
    }
    return Rng(h);
  }

  Rng split(uint64_t salt) const {
    Rng r(state_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    r.next_u64();
    return r;
  }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace dmem
