#pragma once

// Pool-based active-learning loop: initialize, train, evaluate, query, augment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "albench/dataset.hpp"
#include "albench/error.hpp"
#include "albench/io.hpp"
#include "albench/mlp.hpp"
#include "albench/random.hpp"
#include "albench/strategies.hpp"

namespace albench {

struct ALRunConfig {
    Strategy strategy = Strategy::Random;
    std::size_t init_size = 30;
    std::size_t batch_size = 15;
    std::size_t n_query_rounds = 5;
    std::size_t ensemble_size = 5;
    double alpha = 0.6;
    double split_ratio = 0.8;
    TrainHyperparams train;
    NetShape shape;
    int kmeans_max_iters = 100;
    std::uint64_t seed = 0;
    unsigned member_threads = 1;

    std::size_t final_labeled_count() const noexcept { return init_size + n_query_rounds * batch_size; }

    void validate() const
    {
        train.validate();
        if (init_size < 2)
            throw ValidationError("init_size must be at least 2");
        if (batch_size < 1)
            throw ValidationError("batch_size must be at least 1");
        if (ensemble_size < 2)
            throw ValidationError("ensemble_size must be at least 2");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ValidationError("alpha must lie in [0, 1]");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw ValidationError("split_ratio must lie in (0, 1)");
    }
};

struct EvalResult {
    double mae = 0.0;
    std::optional<double> r2; // empty when the targets have zero variance
};

/// MAE and R^2 of given predictions against targets.
inline EvalResult evaluate_predictions(std::span<const double> predictions, std::span<const double> targets)
{
    if (targets.empty() || predictions.size() != targets.size())
        throw ValidationError("evaluate: need a non-empty test set with one prediction per target");
    const double n = static_cast<double>(targets.size());
    double abs_sum = 0.0, sse = 0.0, mean = 0.0;
    for (const double t : targets)
        mean += t;
    mean /= n;
    double sst = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double r = predictions[i] - targets[i];
        abs_sum += std::abs(r);
        sse += r * r;
        sst += (targets[i] - mean) * (targets[i] - mean);
    }
    EvalResult out;
    out.mae = abs_sum / n;
    if (sst > 0.0)
        out.r2 = 1.0 - sse / sst;
    return out;
}

/// Ensemble-mean predictions on standardized test features.
inline EvalResult evaluate(const EnsembleModel& model, const Matrix& test_features, std::span<const double> test_targets)
{
    return evaluate_predictions(predict_batch(model, test_features).mean, test_targets);
}

struct LabeledSplit {
    std::vector<std::size_t> labeled;   // dataset indices in draw order
    std::vector<std::size_t> remaining; // ascending
};

inline LabeledSplit initialize_labeled(std::span<const std::size_t> pool, std::size_t init_size, std::uint64_t seed)
{
    if (init_size > pool.size())
        throw InsufficientDataError("initialize_labeled: pool of " + std::to_string(pool.size()) +
                                    " is smaller than init_size " + std::to_string(init_size));
    Rng rng(derive_seed(seed, 0x1417));
    const auto picks = sample_without_replacement(pool.size(), init_size, rng);
    std::vector<bool> taken(pool.size(), false);
    LabeledSplit out;
    for (const auto p : picks) {
        taken[p] = true;
        out.labeled.push_back(pool[p]);
    }
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (!taken[i])
            out.remaining.push_back(pool[i]);
    std::sort(out.remaining.begin(), out.remaining.end());
    return out;
}

struct IterationRecord {
    std::size_t iteration = 0;
    std::size_t labeled_count = 0;
    double mae = 0.0;
    std::optional<double> r2;
    std::vector<std::size_t> queried_indices; // dataset indices added after this evaluation
    std::vector<double> query_scores;
    double wall_time = 0.0; // seconds
};

struct RunResult {
    ALRunConfig config;
    std::vector<IterationRecord> curve;
    std::vector<std::size_t> initial_labeled;
    std::vector<std::size_t> test_indices;
    std::size_t pool_size = 0;
    std::optional<EnsembleModel> final_model;
    std::optional<std::string> error;

    std::vector<std::size_t> all_queried() const
    {
        std::vector<std::size_t> out;
        for (const auto& r : curve)
            out.insert(out.end(), r.queried_indices.begin(), r.queried_indices.end());
        return out;
    }
};

/// Thrown when a run fails part-way; carries the curve recorded so far.
class RunAborted : public std::runtime_error {
public:
    RunAborted(const std::string& what, RunResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}

    const RunResult& partial() const noexcept { return partial_; }

private:
    RunResult partial_;
};

namespace detail {

inline constexpr std::uint64_t kEnsembleSeedTag = 0xE45E;
inline constexpr std::uint64_t kRandomQueryTag = 0x9A4D;
inline constexpr std::uint64_t kKMeansTag = 0xC1A5;

/// Ensemble base seed for a run; member m at iteration t uses base + 1000 t + m.
inline std::uint64_t ensemble_base_seed(std::uint64_t run_seed) { return derive_seed(run_seed, kEnsembleSeedTag); }

inline std::vector<double> gather_targets(std::span<const double> y, std::span<const std::size_t> idx)
{
    std::vector<double> out;
    out.reserve(idx.size());
    for (const auto i : idx)
        out.push_back(y[i]);
    return out;
}

inline QueryBatch run_strategy(const ALRunConfig& cfg, std::size_t iteration, const EnsembleModel& model,
                               const Matrix& pool_std, const Matrix& labeled_std)
{
    switch (cfg.strategy) {
    case Strategy::Random:
        return select_random(pool_std.rows(), cfg.batch_size, derive_seed(cfg.seed, kRandomQueryTag, iteration));
    case Strategy::Uncertainty:
        return select_uncertainty(predict_batch(model, pool_std).variance, cfg.batch_size);
    case Strategy::Diversity:
        return select_diversity(pool_std, cfg.batch_size, derive_seed(cfg.seed, kKMeansTag, iteration),
                                cfg.kmeans_max_iters);
    case Strategy::Hybrid: {
        const auto u = predict_batch(model, pool_std).variance;
        std::vector<double> d(pool_std.rows());
        for (std::size_t i = 0; i < pool_std.rows(); ++i)
            d[i] = distance_to_labeled(pool_std.row(i), labeled_std);
        return select_hybrid(u, d, cfg.alpha, cfg.batch_size);
    }
    }
    throw ValidationError("unknown strategy");
}

/// Shared loop. Pool rows come from `train`, test rows from `test`
/// (which may be the same dataset).
inline RunResult run_loop(const ALRunConfig& cfg, const Dataset& train, std::span<const std::size_t> pool,
                          const Dataset& test, std::span<const std::size_t> test_idx)
{
    cfg.validate();
    if (cfg.final_labeled_count() > pool.size())
        throw ValidationError("schedule needs " + std::to_string(cfg.final_labeled_count()) +
                              " labeled samples but the pool holds " + std::to_string(pool.size()));
    if (test_idx.empty())
        throw ValidationError("empty test set");

    RunResult result;
    result.config = cfg;
    result.pool_size = pool.size();
    result.test_indices.assign(test_idx.begin(), test_idx.end());

    LabeledSplit state = initialize_labeled(pool, cfg.init_size, cfg.seed);
    result.initial_labeled = state.labeled;

    const Matrix test_raw = test.features.select_rows(test_idx);
    const std::vector<double> test_y = gather_targets(test.targets, test_idx);
    const std::uint64_t base_seed = ensemble_base_seed(cfg.seed);

    for (std::size_t t = 0; t <= cfg.n_query_rounds; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = t;
        rec.labeled_count = state.labeled.size();
        try {
            const Matrix labeled_raw = train.features.select_rows(state.labeled);
            const StandardizationParams params = fit_standardization(labeled_raw);
            const Matrix labeled_std = apply_standardization(labeled_raw, params);
            const std::vector<double> labeled_y = gather_targets(train.targets, state.labeled);

            std::vector<std::uint64_t> seeds(cfg.ensemble_size);
            for (std::size_t m = 0; m < seeds.size(); ++m)
                seeds[m] = base_seed + 1000 * t + m;
            EnsembleModel model =
                train_ensemble_with_seeds(labeled_std, labeled_y, cfg.train, seeds, cfg.shape, cfg.member_threads);
            model.standardization = params;

            const EvalResult ev = evaluate(model, apply_standardization(test_raw, params), test_y);
            rec.mae = ev.mae;
            rec.r2 = ev.r2;

            if (t < cfg.n_query_rounds) {
                const Matrix pool_std = apply_standardization(train.features.select_rows(state.remaining), params);
                const QueryBatch q = run_strategy(cfg, t, model, pool_std, labeled_std);
                std::vector<bool> picked(state.remaining.size(), false);
                for (std::size_t k = 0; k < q.indices.size(); ++k) {
                    const std::size_t pos = q.indices[k];
                    picked[pos] = true;
                    rec.queried_indices.push_back(state.remaining[pos]);
                    rec.query_scores.push_back(q.scores[k]);
                }
                std::vector<std::size_t> rest;
                rest.reserve(state.remaining.size() - q.indices.size());
                for (std::size_t i = 0; i < state.remaining.size(); ++i)
                    if (!picked[i])
                        rest.push_back(state.remaining[i]);
                state.remaining = std::move(rest);
                state.labeled.insert(state.labeled.end(), rec.queried_indices.begin(), rec.queried_indices.end());
            } else {
                result.final_model = std::move(model);
            }
        } catch (const std::exception& ex) {
            const std::string message = "iteration " + std::to_string(t) + ": " + ex.what();
            result.error = message;
            throw RunAborted(message, std::move(result));
        }
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.curve.push_back(std::move(rec));
    }
    return result;
}

} // namespace detail

/// In-domain run: seeded split of `data`, then the active-learning loop on the pool part.
inline RunResult run_al(const ALRunConfig& config, const Dataset& data)
{
    const SplitDataset s = split(data.size(), config.split_ratio, config.seed);
    return detail::run_loop(config, data, s.pool_indices, data, s.test_indices);
}

/// Cross-database run: the whole of `train` is the pool, the whole of `test` the test set.
inline RunResult run_transfer(const ALRunConfig& config, const Dataset& train, const Dataset& test)
{
    std::vector<std::size_t> pool(train.size()), test_idx(test.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::iota(test_idx.begin(), test_idx.end(), std::size_t{0});
    return detail::run_loop(config, train, pool, test, test_idx);
}

/// Record ids present in both datasets.
inline std::vector<std::string> overlapping_ids(const Dataset& a, const Dataset& b)
{
    std::vector<std::string> x = a.ids, y = b.ids, out;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
    return out;
}

// ---------------------------------------------------------------------------
// Run log and curve CSV

inline nlohmann::json run_config_to_json(const ALRunConfig& c)
{
    return {{"strategy", to_string(c.strategy)},
            {"init_size", c.init_size},
            {"batch_size", c.batch_size},
            {"n_query_rounds", c.n_query_rounds},
            {"ensemble_size", c.ensemble_size},
            {"alpha", c.alpha},
            {"split_ratio", c.split_ratio},
            {"train", hyper_to_json(c.train)},
            {"hidden_layers", {c.shape.hidden1, c.shape.hidden2}},
            {"kmeans_max_iters", c.kmeans_max_iters},
            {"seed", c.seed}};
}

inline nlohmann::json run_log_to_json(const RunResult& r, const std::vector<std::string>& train_ids = {})
{
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& rec : r.curve) {
        nlohmann::json j = {{"iteration", rec.iteration},
                            {"labeled_count", rec.labeled_count},
                            {"mae_ev_per_atom", rec.mae},
                            {"r2", rec.r2 ? nlohmann::json(*rec.r2) : nlohmann::json(nullptr)},
                            {"queried_indices", rec.queried_indices},
                            {"query_scores", rec.query_scores},
                            {"wall_time_s", rec.wall_time}};
        if (!train_ids.empty()) {
            std::vector<std::string> ids;
            for (const auto i : rec.queried_indices)
                ids.push_back(train_ids.at(i));
            j["queried_ids"] = ids;
        }
        iters.push_back(std::move(j));
    }
    nlohmann::json out = {{"config", run_config_to_json(r.config)},
                          {"pool_size", r.pool_size},
                          {"test_size", r.test_indices.size()},
                          {"initial_labeled", r.initial_labeled},
                          {"iterations", std::move(iters)},
                          {"status", r.error ? "failed" : "ok"}};
    if (r.error)
        out["error"] = *r.error;
    return out;
}

struct CurveRow {
    std::string direction; // empty for in-domain runs
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    std::size_t labeled_count = 0;
    double mae = 0.0;
    double r2 = 0.0; // NaN when undefined

    friend bool operator==(const CurveRow& a, const CurveRow& b)
    {
        const auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return a.direction == b.direction && a.strategy == b.strategy && a.seed == b.seed &&
               a.iteration == b.iteration && a.labeled_count == b.labeled_count && same(a.mae, b.mae) &&
               same(a.r2, b.r2);
    }
};

inline std::vector<CurveRow> curve_rows(const RunResult& r, const std::string& direction = {})
{
    std::vector<CurveRow> out;
    for (const auto& rec : r.curve)
        out.push_back({direction, to_string(r.config.strategy), r.config.seed, rec.iteration, rec.labeled_count,
                       rec.mae, rec.r2.value_or(std::numeric_limits<double>::quiet_NaN())});
    return out;
}

inline constexpr std::string_view kCurveHeader = "strategy,seed,iteration,labeled_count,mae_ev_per_atom,r2";
inline constexpr std::string_view kTransferCurveHeader =
    "direction,strategy,seed,iteration,labeled_count,mae_ev_per_atom,r2";

inline std::string write_curve_csv(std::span<const CurveRow> rows, bool with_direction = false)
{
    std::string out(with_direction ? kTransferCurveHeader : kCurveHeader);
    out += '\n';
    for (const auto& r : rows) {
        if (with_direction)
            out += r.direction + ',';
        out += r.strategy + ',' + std::to_string(r.seed) + ',' + std::to_string(r.iteration) + ',' +
               std::to_string(r.labeled_count) + ',' + format_real(r.mae) + ',' + format_real(r.r2) + '\n';
    }
    return out;
}

inline std::vector<CurveRow> read_curve_csv(std::string_view text)
{
    std::vector<CurveRow> rows;
    std::size_t pos = 0, line_no = 0;
    bool with_direction = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line_no == 1) {
            if (line == kTransferCurveHeader)
                with_direction = true;
            else if (line != kCurveHeader)
                throw ParseError("curve CSV: unexpected header '" + std::string(line) + "'");
            continue;
        }
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        const std::size_t off = with_direction ? 1 : 0;
        if (f.size() != 6 + off)
            throw ParseError("curve CSV line " + std::to_string(line_no) + ": wrong field count");
        try {
            CurveRow r;
            if (with_direction)
                r.direction = f[0];
            r.strategy = f[off];
            r.seed = std::stoull(f[off + 1]);
            r.iteration = std::stoull(f[off + 2]);
            r.labeled_count = std::stoull(f[off + 3]);
            r.mae = parse_real(f[off + 4]);
            r.r2 = parse_real(f[off + 5]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("curve CSV line " + std::to_string(line_no) + ": bad integer field");
        }
    }
    return rows;
}

} // namespace albench
