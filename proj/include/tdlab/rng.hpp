#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace tdlab {

/// Deterministic PRNG: xoshiro256** seeded through splitmix64.
/// Streams are derived from a run seed as derive_stream(seed, index); the
/// derivation whitens seed ^ index so nearby indices give unrelated streams.
/// All sampling goes through next_double() so output is identical across
/// platforms for a given seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 random bits.
    double next_double();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

    /// Index i with probability probs[i]; probs need not be exactly normalized.
    int categorical(const Eigen::VectorXd& probs);

    /// Index into a cumulative-sum table (last entry treated as the total mass).
    int categorical_from_cumsum(const std::vector<double>& cumsum);

  private:
    std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Stream-derivation rule: run seed xor stream index, whitened twice.
std::uint64_t derive_stream(std::uint64_t run_seed, std::uint64_t index);

}  // namespace tdlab
