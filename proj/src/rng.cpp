#include "tdlab/rng.hpp"

#include "tdlab/errors.hpp"

namespace tdlab {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_stream(std::uint64_t run_seed, std::uint64_t index) {
    std::uint64_t state = run_seed ^ index;
    splitmix64(state);
    return splitmix64(state);
}

Rng::Rng(std::uint64_t seed) {
    // Expand the 64-bit seed into the 256-bit state; splitmix64 guarantees the
    // state is never all zero.
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

int Rng::categorical(const Eigen::VectorXd& probs) {
    const double total = probs.sum();
    double u = next_double() * total;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        u -= probs[i];
        if (u < 0.0) return i;
    }
    return n - 1;
}

int Rng::categorical_from_cumsum(const std::vector<double>& cumsum) {
    const double u = next_double() * cumsum.back();
    const int n = static_cast<int>(cumsum.size());
    for (int i = 0; i < n; ++i) {
        if (u < cumsum[i]) return i;
    }
    return n - 1;
}

}  // namespace tdlab
