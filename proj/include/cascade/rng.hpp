#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace cascade {

// Deterministic 64-bit generator (splitmix64). We roll our own draws instead
// of <random> distributions so that results are identical across standard
// library implementations, which matters for the rerun-identical contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    // Standard normal via Box-Muller (one draw per call, cached pair dropped
    // to keep the stream position simple to reason about).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool coin() { return (next_u64() & 1u) != 0; }

private:
    std::uint64_t state_;
};

// Derive an independent named stream from a master seed, so that e.g. weight
// init and batch shuffling never share a stream position.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = 0xCBF29CE484222325ULL ^ master;
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    h ^= index + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    Rng mix(h);
    return mix.next_u64();
}

template <typename Container>
void shuffle(Container& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.index(i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace cascade
