#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ruler::rng {

// FNV-1a, used to fold purpose tags and dataset names into stream keys and to
// fingerprint byte blobs for cache keys.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(std::string_view(static_cast<const char*>(data), len), h);
}

// PCG32 (XSH RR 64/32). Small, fast, and easy to key into independent streams.
class Pcg32 {
public:
    Pcg32(std::uint64_t initstate, std::uint64_t initseq) {
        state_ = 0u;
        inc_ = (initseq << 1u) | 1u;
        next_u32();
        state_ += initstate;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Unbiased bounded draw (rejection on the low 64-bit multiply).
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        // Lemire's multiply-shift with rejection; deterministic everywhere.
        while (true) {
            std::uint64_t x = next_u64();
            unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= bound || lo >= static_cast<std::uint64_t>(-static_cast<std::int64_t>(bound)) % bound)
                return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Uniform in (0, 1]: 53 random bits, shifted off zero so log() is safe.
    double next_double() {
        std::uint64_t bits = next_u64() >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second deviate is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Every stochastic choice in the toolkit draws from a stream keyed by
// (purpose tag, dataset name, caller seed). Distinct purposes never share a
// stream, so adding a new consumer cannot silently shift existing draws.
inline Pcg32 make_stream(std::string_view purpose, std::string_view dataset,
                         std::uint64_t seed) {
    std::uint64_t a = fnv1a64(purpose);
    std::uint64_t b = fnv1a64(dataset, a * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL);
    return Pcg32(a ^ (seed * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL), b);
}

// First k elements of a Fisher-Yates pass over [pool], returned sorted.
// Used for forget sets, retain subsamples and pool caps.
inline std::vector<std::size_t> sample_without_replacement(
    const std::vector<std::size_t>& pool, std::size_t k, Pcg32& g) {
    std::vector<std::size_t> items(pool);
    const std::size_t n = items.size();
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(g.next_below(n - i));
        std::swap(items[i], items[j]);
    }
    items.resize(k);
    std::sort(items.begin(), items.end());
    return items;
}

}  // namespace ruler::rng
