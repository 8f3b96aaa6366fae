#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cbma {

using Rng = std::mt19937_64;

/// Mixes a master seed with a path of stream coordinates (replicate index,
/// study index, grid cell, ...) into an independent generator. Each
/// coordinate passes through SplitMix64, so streams depend only on the path,
/// never on which worker consumes them.
Rng make_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);

std::uint64_t splitmix64(std::uint64_t x);

/// A fresh nondeterministic seed, for commands run without --seed.
std::uint64_t random_seed();

}  // namespace cbma
