#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace panm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream per (seed, client, round, purpose). Results never depend
// on scheduling order, only on these four values.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t client,
                                 std::uint64_t round, std::uint64_t purpose) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ client);
    h = splitmix64(h ^ round);
    h = splitmix64(h ^ purpose);
    return h;
}

// Draw `count` distinct elements from `pool` by partial Fisher-Yates.
// `pool` is taken by value on purpose; order of the result is the draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t count,
                                          std::mt19937_64& rng) {
    if (count > pool.size()) count = pool.size();
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace panm
