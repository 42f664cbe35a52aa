#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace gsvit {

// xoshiro256** with splitmix64 seeding. All randomness in the engine (weight
// init, dropout masks, batch sampling, augmentation) flows through this type so
// that a run is reproducible from a single 64-bit seed, independent of the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    // Independent stream for a named purpose, e.g. Rng::derive(seed, "init").
    static Rng derive(std::uint64_t seed, std::string_view stream);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    double normal();
    // Normal(0, stddev) resampled until it lies within +-bound*stddev.
    double truncated_normal(double stddev, double bound = 2.0);

    bool bernoulli(double p);

    template <typename Item>
    void shuffle(std::vector<Item>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_[4];
};

}  // namespace gsvit
