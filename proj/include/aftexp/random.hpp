#pragma once

#include <cstdint>
#include <random>

namespace aftexp {

using Rng = std::mt19937_64;

/// Independent generator for (seed, index, substream); identical regardless of
/// which worker thread consumes it.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t substream = 0)
{
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(index), hi(index), lo(substream), hi(substream)};
    return Rng(seq);
}

/// Uniform draw on the open interval (0, 1).
inline double open_uniform(Rng& gen)
{
    return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace aftexp
