#pragma once
#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace heat {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a named, indexed substream of a root seed.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    return mix64(mix64(mix64(root ^ h) + a) + b);
}

using Rng = std::mt19937_64;

/// Fold id in [0, folds) for each of n items: a seeded permutation dealt
/// round-robin, so fold sizes differ by at most one.
inline std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed)
{
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return fold;
}

} // namespace heat
