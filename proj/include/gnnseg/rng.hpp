#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gnnseg {

// Seedable generator with hand-rolled draw functions. std::mt19937_64 is
// fully specified by the standard; the distributions are not, so uniform and
// gaussian are implemented here to keep results pinned to the repo.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // index in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  // standard normal via Box-Muller, caching the paired draw
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    double u2 = uniform01();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gnnseg
