#pragma once

// Seeded random utilities with results that do not depend on the standard
// library implementation. std::uniform_*_distribution is implementation
// defined, so every draw here is derived from the raw 64-bit engine output.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace albench {

/// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a base seed with a stream tag and an index.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) noexcept
{
    return mix_seed(mix_seed(base ^ mix_seed(tag)) + index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection (unbiased).
    std::size_t index(std::size_t n)
    {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r = engine_();
        while (r >= limit)
            r = engine_();
        return static_cast<std::size_t>(r % bound);
    }

    /// Standard normal via Box-Muller (one value per call, second discarded).
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <class T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    template <class T>
    void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

private:
    std::mt19937_64 engine_;
};

/// Draw k distinct positions from [0, n) by a partial Fisher-Yates pass.
/// The result is in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k > n)
        k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace albench
