#ifndef MORPHDICT_RNG_HPP
#define MORPHDICT_RNG_HPP

#include <cstdint>
#include <random>

namespace morphdict {

// std::uniform_real_distribution is implementation-defined; seeded runs
// must reproduce bit-identically across platforms, so draws are mapped
// from raw engine output by hand.

/// Uniform draw in the open interval (0,1).
inline double uniform01(std::mt19937_64& gen) {
    return (double(gen() >> 11) + 0.5) * (1.0 / 9007199254740992.0); // 2^-53
}

/// Uniform draw in (-1,1).
inline double uniform_sym(std::mt19937_64& gen) { return 2.0 * uniform01(gen) - 1.0; }

} // namespace morphdict

#endif // MORPHDICT_RNG_HPP
