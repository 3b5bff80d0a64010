#pragma once

#include <cstdint>
#include <vector>

namespace repspace {

/// xorshift64* generator (Vigna, 2016), seeded through one round of
/// splitmix64 so that small or zero seeds still give a full-period state.
/// Normals come from the Box-Muller transform; the second value of each
/// pair is cached. Output depends only on the seed, never on the platform's
/// standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    double gamma(double shape);
    double beta(double a, double b);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace repspace
