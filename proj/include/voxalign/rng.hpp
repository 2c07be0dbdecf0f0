#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace voxalign {

// Deterministic RNG with named substreams. All randomness in the project
// flows from one master seed; a substream is derived from (seed, tag) so
// data generation, weight init, and shuffling stay independent of each
// other and reproducible across runs and platforms. Distributions are
// hand-rolled on top of the raw generator; std:: distributions are
// implementation-defined and would break byte-identity guarantees across
// standard libraries.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view tag);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    // Standard normal via Box-Muller.
    double normal();
    // Index drawn from unnormalized weights.
    std::size_t categorical(const std::vector<double>& weights);

    // Fisher-Yates shuffle of indices 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t state_[4];
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace voxalign
