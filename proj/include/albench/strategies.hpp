#pragma once

// Pool-based query strategies. Every selector returns positions into the
// pool arrays it was given; ties always go to the lower position.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "albench/error.hpp"
#include "albench/matrix.hpp"
#include "albench/random.hpp"

namespace albench {

enum class Strategy { Random, Uncertainty, Diversity, Hybrid };

inline constexpr Strategy kAllStrategies[] = {Strategy::Random, Strategy::Uncertainty, Strategy::Diversity,
                                              Strategy::Hybrid};

inline std::string to_string(Strategy s)
{
    switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Uncertainty: return "uncertainty";
    case Strategy::Diversity: return "diversity";
    case Strategy::Hybrid: return "hybrid";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view name)
{
    for (const Strategy s : kAllStrategies)
        if (to_string(s) == name)
            return s;
    throw ValidationError("unknown strategy '" + std::string(name) +
                          "' (expected random, uncertainty, diversity or hybrid)");
}

struct QueryBatch {
    std::vector<std::size_t> indices; // positions in the pool
    std::vector<double> scores;
    Strategy strategy = Strategy::Random;
};

namespace detail {

/// Positions of the `b` largest scores, ordered by descending score then ascending position.
inline std::vector<std::size_t> top_b(std::span<const double> scores, std::size_t b)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    b = std::min(b, order.size());
    const auto before = [&](std::size_t a, std::size_t c) {
        return scores[a] > scores[c] || (scores[a] == scores[c] && a < c);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(), before);
    order.resize(b);
    return order;
}

} // namespace detail

/// Uniform sample of min(B, pool size) distinct positions.
inline QueryBatch select_random(std::size_t pool_size, std::size_t batch_size, std::uint64_t seed)
{
    if (pool_size == 0)
        throw ValidationError("select_random: empty pool");
    Rng rng(derive_seed(seed, 0x4A4D));
    QueryBatch q;
    q.strategy = Strategy::Random;
    q.indices = sample_without_replacement(pool_size, batch_size, rng);
    q.scores.assign(q.indices.size(), 0.0);
    return q;
}

/// Top-B by ensemble variance.
inline QueryBatch select_uncertainty(std::span<const double> uncertainty, std::size_t batch_size)
{
    QueryBatch q;
    q.strategy = Strategy::Uncertainty;
    q.indices = detail::top_b(uncertainty, batch_size);
    for (const auto i : q.indices)
        q.scores.push_back(uncertainty[i]);
    return q;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
    Matrix centroids;                     // k_eff x d
    std::vector<std::size_t> assignments; // one cluster id per point
    std::vector<double> sse_history;      // within-cluster SSE after each assignment step
    int iterations = 0;
};

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x, const Matrix& centroids, double* dist2 = nullptr)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(x, centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist2)
        *dist2 = best_d;
    return best;
}

inline double within_cluster_sse(const Matrix& points, const Matrix& centroids,
                                  std::span<const std::size_t> assignments)
{
    double s = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i)
        s += squared_distance(points.row(i), centroids.row(assignments[i]));
    return s;
}

/// k-means++ seeding. When all remaining D^2 weights are zero (fewer distinct
/// points than k) the lowest unused position is taken.
inline Matrix kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng)
{
    const std::size_t n = points.rows();
    Matrix centroids(0, points.cols());
    std::vector<bool> used(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    std::size_t pick = rng.index(n);
    for (std::size_t c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                total += d2[i];
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                pick = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (d2[i] <= 0.0)
                        continue;
                    acc += d2[i];
                    pick = i;
                    if (acc > target)
                        break;
                }
            } else {
                pick = static_cast<std::size_t>(std::find(used.begin(), used.end(), false) - used.begin());
            }
        }
        used[pick] = true;
        centroids.append_row(points.row(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
    return centroids;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding. If n < k every point is its own
/// cluster. Empty clusters are reseeded with the point farthest from its
/// assigned centroid.
inline KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iters = 100)
{
    const std::size_t n = points.rows();
    if (n == 0 || k == 0)
        throw ValidationError("kmeans: need at least one point and one cluster");
    KMeansResult res;
    if (n <= k) {
        res.centroids = points;
        res.assignments.resize(n);
        std::iota(res.assignments.begin(), res.assignments.end(), std::size_t{0});
        res.sse_history.push_back(0.0);
        return res;
    }

    Rng rng(derive_seed(seed, 0xC1u));
    res.centroids = detail::kmeanspp_seed(points, k, rng);
    res.assignments.assign(n, k); // k = unassigned
    const std::size_t d = points.cols();

    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = detail::nearest_centroid(points.row(i), res.centroids);
            if (c != res.assignments[i]) {
                res.assignments[i] = c;
                changed = true;
            }
        }

        std::vector<std::size_t> counts(k, 0);
        for (const auto a : res.assignments)
            ++counts[a];
        // Reseed empty clusters from the worst-fit points.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0)
                continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.assignments[i]] < 2)
                    continue;
                const double dd = squared_distance(points.row(i), res.centroids.row(res.assignments[i]));
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            if (far == n || far_d <= 0.0)
                break;
            --counts[res.assignments[far]];
            res.assignments[far] = c;
            counts[c] = 1;
            const auto p = points.row(far);
            std::copy(p.begin(), p.end(), res.centroids.row(c).begin());
            changed = true;
        }
        res.sse_history.push_back(detail::within_cluster_sse(points, res.centroids, res.assignments));

        Matrix next(k, d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = next.row(res.assignments[i]);
            const auto p = points.row(i);
            for (std::size_t j = 0; j < d; ++j)
                row[j] += p[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            auto row = next.row(c);
            if (counts[c] == 0) {
                const auto old = res.centroids.row(c);
                std::copy(old.begin(), old.end(), row.begin());
                continue;
            }
            for (auto& v : row)
                v /= static_cast<double>(counts[c]);
        }
        res.centroids = std::move(next);
        res.iterations = it + 1;
        if (!changed)
            break;
    }
    res.sse_history.push_back(detail::within_cluster_sse(points, res.centroids, res.assignments));
    return res;
}

// ---------------------------------------------------------------------------
// Diversity

/// Minimum Euclidean distance from x to any labeled row; +inf when there are none.
inline double distance_to_labeled(std::span<const double> x, const Matrix& labeled)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < labeled.rows(); ++i)
        best = std::min(best, squared_distance(x, labeled.row(i)));
    return std::sqrt(best);
}

/// One representative per k-means cluster (the pool point nearest each
/// centroid), then farthest-point fill until min(B, pool size) positions are
/// chosen. Fill points score by their distance to the selected set,
/// representatives by minus their distance to the centroid.
inline QueryBatch select_diversity(const Matrix& pool_features, std::size_t batch_size, std::uint64_t seed,
                                   int max_iters = 100)
{
    const std::size_t n = pool_features.rows();
    if (n == 0)
        throw ValidationError("select_diversity: empty pool");
    const std::size_t want = std::min(batch_size, n);
    QueryBatch q;
    q.strategy = Strategy::Diversity;
    if (want == 0)
        return q;

    const KMeansResult km = kmeans(pool_features, want, seed, max_iters);
    std::vector<bool> chosen(n, false);
    std::vector<std::size_t> cluster_size(km.centroids.rows(), 0);
    for (const auto a : km.assignments)
        ++cluster_size[a];

    for (std::size_t c = 0; c < km.centroids.rows(); ++c) {
        if (cluster_size[c] == 0)
            continue;
        std::size_t best = n;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = squared_distance(pool_features.row(i), km.centroids.row(c));
            if (d2 < best_d) {
                best_d = d2;
                best = i;
            }
        }
        if (chosen[best])
            continue;
        chosen[best] = true;
        q.indices.push_back(best);
        q.scores.push_back(-std::sqrt(best_d));
    }

    // Farthest-point fill.
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    for (const auto s : q.indices)
        for (std::size_t i = 0; i < n; ++i)
            min_d[i] = std::min(min_d[i], squared_distance(pool_features.row(i), pool_features.row(s)));
    while (q.indices.size() < want) {
        std::size_t best = n;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!chosen[i] && min_d[i] > best_d) {
                best_d = min_d[i];
                best = i;
            }
        chosen[best] = true;
        q.indices.push_back(best);
        q.scores.push_back(std::isinf(best_d) ? best_d : std::sqrt(best_d));
        for (std::size_t i = 0; i < n; ++i)
            min_d[i] = std::min(min_d[i], squared_distance(pool_features.row(i), pool_features.row(best)));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Hybrid

/// (s - min) / (max - min); a constant input maps to 0.5 everywhere.
inline std::vector<double> minmax_normalize(std::span<const double> scores)
{
    std::vector<double> out(scores.size(), 0.5);
    if (scores.empty())
        return out;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double range = *hi - *lo;
    if (!(range > 0.0))
        return out;
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = (scores[i] - *lo) / range;
    return out;
}

/// alpha * U_norm + (1 - alpha) * D_norm for every pool point.
inline std::vector<double> hybrid_scores(std::span<const double> uncertainty, std::span<const double> distance,
                                         double alpha)
{
    if (uncertainty.size() != distance.size())
        throw ValidationError("hybrid: uncertainty and distance arrays differ in length");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ValidationError("hybrid: alpha must lie in [0, 1]");
    const auto u = minmax_normalize(uncertainty);
    const auto d = minmax_normalize(distance);
    std::vector<double> s(u.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = alpha * u[i] + (1.0 - alpha) * d[i];
    return s;
}

inline QueryBatch select_hybrid(std::span<const double> uncertainty, std::span<const double> distance, double alpha,
                                std::size_t batch_size)
{
    const auto s = hybrid_scores(uncertainty, distance, alpha);
    QueryBatch q;
    q.strategy = Strategy::Hybrid;
    q.indices = detail::top_b(s, batch_size);
    for (const auto i : q.indices)
        q.scores.push_back(s[i]);
    return q;
}

} // namespace albench
