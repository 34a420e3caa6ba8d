#pragma once
#include <cmath>
#include <cstdint>

namespace slg {

// Counter-based normal generator: every draw is a pure function of
// (seed, path_index, step, substream), so ensemble statistics are identical
// under any parallel schedule.
namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix4(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
    uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h = splitmix64(h ^ d);
    return h;
}

inline double to_unit(uint64_t h) {
    // (0,1): top 53 bits, offset by half an ulp so log() is safe
    return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}
}  // namespace detail

struct NoiseStream {
    uint64_t seed = 0;
    uint64_t path_index = 0;
    double kappa = 0.0;

    // standard normal via Box-Muller on two counter-based uniforms
    double normal(uint64_t step, uint64_t substream = 0) const {
        double u1 = detail::to_unit(detail::mix4(seed, path_index, step, 2 * substream));
        double u2 = detail::to_unit(detail::mix4(seed, path_index, step, 2 * substream + 1));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Brownian increment over auxiliary time dq: Normal(0, (kappa/2) dq)
    double dW(uint64_t step, double dq, uint64_t substream = 0) const {
        return std::sqrt(0.5 * kappa * dq) * normal(step, substream);
    }
};

}  // namespace slg
