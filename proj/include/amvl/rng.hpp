#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace amvl {

// FNV-1a 64-bit. Stable across platforms; used wherever a seed or token
// needs a reproducible hash.
inline constexpr uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline constexpr uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic counter-based generator. Streams are derived by mixing the
// parent seed with arbitrary words, so (run_seed, request_index) style
// derivations give independent, replayable sequences with no shared state.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds (0, 1, 2, ...)
        splitmix64(state_);
    }

    static DetRng derive(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
        uint64_t s = seed;
        s = splitmix64(s) ^ a;
        s = splitmix64(s) ^ b;
        s = splitmix64(s) ^ c;
        return DetRng(s);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [0, bound), bound > 0
    uint64_t next_below(uint64_t bound) {
        // 128-bit multiply avoids modulo bias well below 2^64 bounds
        return static_cast<uint64_t>(
            (static_cast<__uint128_t>(next_u64()) * bound) >> 64);
    }

    // standard normal via Box-Muller; hand-rolled so sequences do not depend
    // on the standard library's distribution implementation
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace amvl
