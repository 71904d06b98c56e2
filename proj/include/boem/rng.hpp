#ifndef BOEM_RNG_HPP
#define BOEM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace boem {

// Portable deterministic RNG. The raw stream is std::mt19937_64 (its output
// sequence is fixed by the standard), uniforms take the top 53 bits, and
// Gaussians use the Box-Muller cosine branch with two fresh uniforms per
// draw. No state is cached between calls, so a path is a pure function of
// the seed on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0, 1); never returns 0 or 1 exactly.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace boem

#endif  // BOEM_RNG_HPP
