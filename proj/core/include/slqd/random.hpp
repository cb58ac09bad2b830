#pragma once

#include <cstdint>
#include <random>

namespace slqd {

// Engine used for every Monte Carlo stream.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed of sub-stream `index` derived from `master`:
//   splitmix64(splitmix64(master) + (index + 1) * 0x9E3779B97F4A7C15)
// This construction is part of the ensemble file format: archived ensembles
// record only the master seed and are regenerated from it.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

// Draw from Exp(mean). Returns +inf for an infinite mean.
double draw_exponential(Rng& rng, double mean);

}  // namespace slqd
