#ifndef GEOSYNTH_RANDOM_HPP
#define GEOSYNTH_RANDOM_HPP

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace geosynth {

using Rng = std::mt19937_64;

/// Named substreams derived from the single user-visible seed.
enum class Stream : std::uint32_t {
  kChain = 1,
  kSynthesis = 2,
  kDataGeneration = 3,
  kPrediction = 4,
};

/// Engine for substream `stream`, optionally indexed (e.g. by replicate).
inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(index & 0xffffffffu),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Derives a child seed; used to give each model fit of an experiment its own chain seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), 0x9e3779b9u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

/// Draw from InvGamma(shape, rate): the reciprocal of Gamma(shape, scale = 1/rate).
inline double inverse_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  return 1.0 / gamma(rng);
}

}  // namespace geosynth

#endif  // GEOSYNTH_RANDOM_HPP
