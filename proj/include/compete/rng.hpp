#ifndef COMPETE_RNG_HPP_
#define COMPETE_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace compete {

// Splits one master seed into independent, labeled component streams
// ("init", "policy", "noise", ...) so that runs differing in a single
// mode flag still share all other randomness.
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index = 0);

// mt19937_64 with hand-rolled draws. The engine sequence is pinned by the
// standard; std:: distributions are not, so normal/gamma/beta are implemented
// here to keep results bit-stable across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  // Marsaglia-Tsang; requires shape >= 1
  double gamma(double shape);

  // via two gamma draws; requires alpha, beta >= 1
  double beta(double alpha, double beta);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace compete

#endif  // COMPETE_RNG_HPP_
