#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mabm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Independent generator derived from a root seed and a stream name, e.g.
/// substream(seed, "population"). All randomness in a run flows through
/// these; there is no ambient RNG.
Rng substream(std::uint64_t root_seed, std::string_view name, std::uint64_t index = 0);

/// Uniform on [0, 1) from the top 53 bits; portable across standard libraries.
double uniform01(Rng& rng);

/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

double standard_normal(Rng& rng);

/// Beta(a, b) via two gamma variates.
double beta_sample(Rng& rng, double a, double b);

}  // namespace mabm
