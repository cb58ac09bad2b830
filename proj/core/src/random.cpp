#include "slqd/random.hpp"

#include <cmath>
#include <limits>

namespace slqd {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

double draw_exponential(Rng& rng, double mean) {
    if (!std::isfinite(mean)) return std::numeric_limits<double>::infinity();
    // 53-bit uniform in (0, 1].
    const double u = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    return -mean * std::log(u);
}

}  // namespace slqd
