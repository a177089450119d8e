#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "jaf/errors.hpp"

namespace jaf {

// Deterministic, platform-independent random stream (splitmix64 core).
// std::uniform_*_distribution is implementation-defined, so all draws are
// hand-rolled to keep runs bit-reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform index in [0, n), unbiased via rejection.
    std::size_t next_index(std::size_t n) {
        if (n == 0) throw Error("next_index: n must be positive");
        std::uint64_t bound = n;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    // Standard normal via Box-Muller (polar discarded; one value per call).
    double next_gaussian() {
        double u1;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct elements of pool, uniform without replacement, in draw order.
    template <typename T>
    std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k) {
        if (k > pool.size()) k = pool.size();
        std::vector<T> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = next_index(pool.size() - i);
            out.push_back(pool[j]);
            std::swap(pool[j], pool[pool.size() - 1 - i]);
        }
        return out;
    }

private:
    std::uint64_t state_;
};

// Derives an independent substream seed from a base seed and a tag
// (FNV-1a over the tag, mixed once through splitmix64).
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL ^ seed;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    Rng mix(h);
    return mix.next_u64();
}

}  // namespace jaf
