#include "recur/rng.hpp"

namespace recur {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t subject) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ replicate);
    h = splitmix64(h ^ subject);
    return h;
}

}  // namespace recur
