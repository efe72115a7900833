#ifndef SLDCNN_RNG_HPP
#define SLDCNN_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <random>

namespace sldcnn {

// Seeded generator. Distributions are derived from the raw 64-bit engine
// output here rather than through <random> distributions, whose algorithms
// are implementation-defined; corpora and weights are therefore identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sldcnn

#endif  // SLDCNN_RNG_HPP
