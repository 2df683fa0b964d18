#pragma once

// Experiment configuration files and the validate / run / transfer drivers
// behind the command-line tool.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "albench/al_loop.hpp"
#include "albench/dataset.hpp"
#include "albench/error.hpp"
#include "albench/io.hpp"
#include "albench/stats.hpp"

namespace albench {

inline constexpr const char* kOutputDirEnv = "ALBENCH_OUTPUT_DIR";

/// Parsed experiment file. Relative paths are resolved against the file's directory.
struct ExperimentConfig {
    std::string system;
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> transfer_a;
    std::optional<std::filesystem::path> transfer_b;
    std::optional<std::filesystem::path> element_table;
    bool leakage_guard = false;
    double dedup_energy_tol = 0.001;
    ALRunConfig run; // strategy and seed are filled per run
    std::vector<std::string> strategies{"random", "uncertainty", "diversity", "hybrid"};
    std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
    TestKind test_kind = TestKind::UnpairedWelch;
    std::optional<std::filesystem::path> output_dir;
    nlohmann::json source; // the file as read, for fingerprinting
};

struct ConfigIssue {
    std::string code;
    std::string message;
};

namespace detail {

inline const std::set<std::string>& known_config_keys()
{
    static const std::set<std::string> keys{
        "system", "manifest", "transfer", "features", "dedup_energy_tol", "split_ratio", "al", "train",
        "strategies", "seeds", "test_kind", "output_dir"};
    return keys;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace detail

/// Structural parse; semantic checks live in validate_experiment.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object())
        throw ParseError("config: top level must be an object");
    for (const auto& [key, value] : j.items())
        if (!detail::known_config_keys().contains(key))
            throw ParseError("config: unknown key '" + key + "'");
    ExperimentConfig c;
    c.source = j;
    try {
        c.system = j.value("system", std::string{});
        if (j.contains("manifest"))
            c.manifest = detail::resolve(base_dir, j["manifest"].get<std::string>());
        if (j.contains("transfer")) {
            const auto& t = j["transfer"];
            if (t.contains("a"))
                c.transfer_a = detail::resolve(base_dir, t["a"].get<std::string>());
            if (t.contains("b"))
                c.transfer_b = detail::resolve(base_dir, t["b"].get<std::string>());
        }
        if (j.contains("features")) {
            const auto& f = j["features"];
            c.leakage_guard = f.value("leakage_guard", false);
            if (f.contains("element_table"))
                c.element_table = detail::resolve(base_dir, f["element_table"].get<std::string>());
        }
        c.dedup_energy_tol = j.value("dedup_energy_tol", c.dedup_energy_tol);
        c.run.split_ratio = j.value("split_ratio", c.run.split_ratio);
        if (j.contains("al")) {
            const auto& a = j["al"];
            c.run.init_size = a.value("init_size", c.run.init_size);
            c.run.batch_size = a.value("batch_size", c.run.batch_size);
            c.run.n_query_rounds = a.value("n_query_rounds", c.run.n_query_rounds);
            c.run.ensemble_size = a.value("ensemble_size", c.run.ensemble_size);
            c.run.alpha = a.value("alpha", c.run.alpha);
            c.run.kmeans_max_iters = a.value("kmeans_max_iters", c.run.kmeans_max_iters);
            if (a.contains("hidden_layers")) {
                const auto h = a["hidden_layers"].get<std::vector<std::size_t>>();
                if (h.size() != 2)
                    throw ParseError("config: al.hidden_layers must have two entries");
                c.run.shape.hidden1 = h[0];
                c.run.shape.hidden2 = h[1];
            }
        }
        if (j.contains("train"))
            c.run.train = hyper_from_json(j["train"]);
        if (j.contains("strategies"))
            c.strategies = j["strategies"].get<std::vector<std::string>>();
        if (j.contains("seeds"))
            c.seeds = j["seeds"].get<std::vector<std::int64_t>>();
        if (j.contains("test_kind"))
            c.test_kind = parse_test_kind(j["test_kind"].get<std::string>());
        if (j.contains("output_dir"))
            c.output_dir = detail::resolve(base_dir, j["output_dir"].get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("config: ") + ex.what());
    } catch (const ValidationError& ex) {
        throw ParseError(std::string("config: ") + ex.what());
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(path.string() + ":" + std::to_string(detail::line_of_offset(text, ex.byte)) + ": " +
                         ex.what());
    }
    return parse_experiment_config(j, path.parent_path());
}

/// FNV-1a over the canonical JSON of the config, minus the output directory.
inline std::string config_fingerprint(const ExperimentConfig& c)
{
    nlohmann::json j = c.source;
    j.erase("output_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
    std::string system;
    std::size_t loaded = 0;
    std::size_t after_filter = 0;
    std::size_t after_dedup = 0;
    Dataset data;
};

inline PreparedData prepare_manifest(const std::filesystem::path& path, const ExperimentConfig& c)
{
    const Manifest m = load_manifest(path);
    const auto filtered = filter_records(m.records);
    const auto unique = deduplicate(filtered, c.dedup_energy_tol);
    const ElementTable table = c.element_table ? ElementTable::load(*c.element_table) : ElementTable::builtin();
    PreparedData p;
    p.system = m.system;
    p.loaded = m.records.size();
    p.after_filter = filtered.size();
    p.after_dedup = unique.size();
    p.data = build_dataset(unique, FeatureSchema::standard(c.leakage_guard), table);
    return p;
}

// ---------------------------------------------------------------------------
// validate

enum class Mode { Run, Transfer };

inline std::vector<ConfigIssue> validate_experiment(const ExperimentConfig& c, Mode mode)
{
    std::vector<ConfigIssue> issues;
    const auto add = [&](std::string code, std::string msg) { issues.push_back({std::move(code), std::move(msg)}); };

    if (c.seeds.empty())
        add("no_seeds", "seeds list is empty");
    if (std::set<std::int64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
        add("duplicate_seeds", "seeds must be distinct");
    for (const auto s : c.seeds)
        if (s < 0)
            add("negative_seed", "seed " + std::to_string(s) + " is negative");
    if (c.strategies.empty())
        add("no_strategies", "strategies list is empty");
    std::set<std::string> seen;
    for (const auto& s : c.strategies) {
        try {
            parse_strategy(s);
        } catch (const ValidationError& ex) {
            add("unknown_strategy", ex.what());
        }
        if (!seen.insert(s).second)
            add("duplicate_strategy", "strategy '" + s + "' listed twice");
    }
    try {
        c.run.validate();
    } catch (const ValidationError& ex) {
        add("bad_parameter", ex.what());
    }
    if (!(c.dedup_energy_tol > 0.0))
        add("bad_parameter", "dedup_energy_tol must be positive");

    const auto check_manifest = [&](const std::filesystem::path& path, const char* label) -> std::optional<PreparedData> {
        try {
            return prepare_manifest(path, c);
        } catch (const std::exception& ex) {
            add("manifest_error", std::string(label) + ": " + ex.what());
            return std::nullopt;
        }
    };
    const std::size_t need = c.run.final_labeled_count();

    if (mode == Mode::Run) {
        if (c.manifest.empty()) {
            add("missing_manifest", "config has no 'manifest'");
            return issues;
        }
        const auto p = check_manifest(c.manifest, "manifest");
        if (!p)
            return issues;
        if (p->data.size() < 5) {
            add("schedule", "only " + std::to_string(p->data.size()) + " records survive filtering");
            return issues;
        }
        const auto n_test =
            static_cast<std::size_t>(std::llround((1.0 - c.run.split_ratio) * static_cast<double>(p->data.size())));
        const std::size_t pool = p->data.size() - std::min(n_test, p->data.size());
        if (need > pool)
            add("schedule", "init_size + n_query_rounds * batch_size = " + std::to_string(need) +
                                " exceeds the pool of " + std::to_string(pool));
    } else {
        if (!c.transfer_a || !c.transfer_b) {
            add("missing_manifest", "transfer mode needs both 'transfer.a' and 'transfer.b'");
            return issues;
        }
        const auto a = check_manifest(*c.transfer_a, "transfer.a");
        const auto b = check_manifest(*c.transfer_b, "transfer.b");
        for (const auto& [p, label] : {std::pair{&a, "transfer.a"}, std::pair{&b, "transfer.b"}}) {
            if (*p && need > (*p)->data.size())
                add("schedule", std::string(label) + " pool of " + std::to_string((*p)->data.size()) +
                                    " is smaller than the schedule's " + std::to_string(need) + " labeled samples");
        }
    }
    return issues;
}

// ---------------------------------------------------------------------------
// run / transfer

struct RunJob {
    std::string direction; // empty for in-domain
    Strategy strategy = Strategy::Random;
    std::uint64_t seed = 0;
};

struct DriverOptions {
    std::filesystem::path output_dir;
    unsigned jobs = 1;
    bool save_models = false;
    std::ostream* out = &std::cout;
    std::ostream* err = &std::cerr;
};

struct DriverResult {
    int exit_code = 0;
    std::vector<RunResult> runs; // successful runs, in job order
    std::vector<std::string> failures;
};

inline std::filesystem::path default_output_dir(const ExperimentConfig& c)
{
    if (c.output_dir)
        return *c.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env)
        return env;
    return "albench_out";
}

namespace detail {

/// Executes jobs on up to `jobs` threads. Results are stored by job index,
/// so output order does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn)
{
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++)
            fn(i);
    };
    if (jobs == 1) {
        worker();
        return;
    }
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < jobs; ++t)
        threads.emplace_back(worker);
    for (auto& t : threads)
        t.join();
}

struct JobOutcome {
    std::optional<RunResult> result;
    std::optional<std::string> error;
};

inline JobOutcome execute_job(const RunJob& job, const ExperimentConfig& c, const Dataset& train,
                              const Dataset* test, const DriverOptions& opt)
{
    ALRunConfig cfg = c.run;
    cfg.strategy = job.strategy;
    cfg.seed = job.seed;
    std::filesystem::path dir = opt.output_dir / "runs";
    if (!job.direction.empty())
        dir /= job.direction;
    dir /= to_string(job.strategy);
    const auto log_path = dir / (std::to_string(job.seed) + ".json");

    JobOutcome out;
    RunResult result;
    try {
        result = test ? run_transfer(cfg, train, *test) : run_al(cfg, train);
    } catch (const RunAborted& ex) {
        result = ex.partial();
        out.error = ex.what();
    } catch (const std::exception& ex) {
        result.config = cfg;
        result.error = ex.what();
        out.error = ex.what();
    }
    nlohmann::json log = run_log_to_json(result, train.ids);
    if (!job.direction.empty())
        log["direction"] = job.direction;
    write_file_atomic(log_path, log.dump(1) + "\n");
    if (opt.save_models && result.final_model)
        write_file_atomic(dir / (std::to_string(job.seed) + ".model.json"),
                          checkpoint_to_json(*result.final_model).dump() + "\n");
    if (!out.error)
        out.result = std::move(result);
    return out;
}

inline void print_report_table(std::ostream& os, const ComparisonReport& rep, const std::string& title)
{
    os << title << " (" << to_string(rep.test_kind) << " t-test vs random)\n";
    const std::vector<std::string> head{"strategy", "final_mae_mean", "final_mae_std", "final_r2_mean",
                                        "final_r2_std", "p_value", "status"};
    std::vector<std::vector<std::string>> table{head};
    for (const auto& r : rep.rows)
        table.push_back(report_row_fields(r));
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : table)
        for (std::size_t i = 0; i < row.size(); ++i)
            width[i] = std::max(width[i], row[i].size());
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << row[i];
            if (i + 1 < row.size())
                os << std::string(width[i] - row[i].size() + 2, ' ');
        }
        os << '\n';
    }
}

/// Aggregate and report one direction (or the in-domain experiment).
inline std::optional<ComparisonReport> make_report(const ExperimentConfig& c, std::span<const RunResult> runs,
                                                   const std::string& system, std::ostream& err)
{
    std::vector<AggregateCurve> curves;
    for (const auto& name : c.strategies) {
        const Strategy s = parse_strategy(name);
        std::vector<RunResult> mine;
        for (const auto& r : runs)
            if (r.config.strategy == s)
                mine.push_back(r);
        if (mine.size() < 2) {
            err << "note: " << name << " has fewer than 2 successful runs; not aggregated\n";
            continue;
        }
        curves.push_back(aggregate(mine));
    }
    const bool has_baseline = std::any_of(curves.begin(), curves.end(),
                                          [](const AggregateCurve& a) { return a.strategy == Strategy::Random; });
    if (!has_baseline) {
        err << "note: no aggregated random baseline; comparison report skipped\n";
        return std::nullopt;
    }
    return build_report(system, curves, final_mae_samples(runs), c.test_kind, config_fingerprint(c));
}

inline std::vector<RunJob> make_jobs(const ExperimentConfig& c, const std::string& direction)
{
    std::vector<RunJob> jobs;
    for (const auto& s : c.strategies)
        for (const auto seed : c.seeds)
            jobs.push_back({direction, parse_strategy(s), static_cast<std::uint64_t>(seed)});
    return jobs;
}

} // namespace detail

/// Every (strategy, seed) pair on one manifest. Writes runs/<strategy>/<seed>.json,
/// curves.csv, report.json and report.csv under the output directory.
inline DriverResult run_experiment(const ExperimentConfig& c, const DriverOptions& opt)
{
    DriverResult res;
    const PreparedData prepared = prepare_manifest(c.manifest, c);
    const std::string system = c.system.empty() ? prepared.system : c.system;
    *opt.err << "loaded " << prepared.loaded << " records, " << prepared.after_filter << " after filtering, "
             << prepared.after_dedup << " after deduplication\n";

    const auto jobs = detail::make_jobs(c, "");
    std::vector<detail::JobOutcome> outcomes(jobs.size());
    std::mutex log_mutex;
    detail::parallel_for(jobs.size(), opt.jobs, [&](std::size_t i) {
        outcomes[i] = detail::execute_job(jobs[i], c, prepared.data, nullptr, opt);
        std::lock_guard lock(log_mutex);
        *opt.err << (outcomes[i].error ? "FAILED " : "done ") << to_string(jobs[i].strategy) << " seed "
                 << jobs[i].seed << (outcomes[i].error ? ": " + *outcomes[i].error : std::string{}) << '\n';
    });

    std::vector<CurveRow> rows;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (outcomes[i].result) {
            const auto r = curve_rows(*outcomes[i].result);
            rows.insert(rows.end(), r.begin(), r.end());
            res.runs.push_back(std::move(*outcomes[i].result));
        } else {
            res.failures.push_back(to_string(jobs[i].strategy) + "/" + std::to_string(jobs[i].seed) + ": " +
                                   outcomes[i].error.value_or("unknown error"));
        }
    }
    write_file_atomic(opt.output_dir / "curves.csv", write_curve_csv(rows));

    if (auto rep = detail::make_report(c, res.runs, system, *opt.err)) {
        write_file_atomic(opt.output_dir / "report.json", report_to_json(*rep).dump(1) + "\n");
        write_file_atomic(opt.output_dir / "report.csv", report_to_csv(*rep));
        detail::print_report_table(*opt.out, *rep, system.empty() ? "final point" : system + " final point");
    }
    res.exit_code = res.failures.empty() ? 0 : 2;
    return res;
}

/// Both transfer directions (a_to_b: pool from A, test on B; b_to_a the reverse).
inline DriverResult run_transfer_experiment(const ExperimentConfig& c, const DriverOptions& opt)
{
    if (!c.transfer_a || !c.transfer_b)
        throw ValidationError("transfer mode needs both 'transfer.a' and 'transfer.b'");
    DriverResult res;
    const PreparedData a = prepare_manifest(*c.transfer_a, c);
    const PreparedData b = prepare_manifest(*c.transfer_b, c);
    if (const auto overlap = overlapping_ids(a.data, b.data); !overlap.empty())
        *opt.err << "warning: " << overlap.size() << " record ids appear in both manifests (kept)\n";

    struct Direction {
        std::string name;
        const PreparedData* train;
        const PreparedData* test;
    };
    const std::vector<Direction> directions{{"a_to_b", &a, &b}, {"b_to_a", &b, &a}};

    std::vector<RunJob> jobs;
    for (const auto& d : directions) {
        const auto j = detail::make_jobs(c, d.name);
        jobs.insert(jobs.end(), j.begin(), j.end());
    }
    std::vector<detail::JobOutcome> outcomes(jobs.size());
    std::mutex log_mutex;
    detail::parallel_for(jobs.size(), opt.jobs, [&](std::size_t i) {
        const auto& d = jobs[i].direction == "a_to_b" ? directions[0] : directions[1];
        outcomes[i] = detail::execute_job(jobs[i], c, d.train->data, &d.test->data, opt);
        std::lock_guard lock(log_mutex);
        *opt.err << (outcomes[i].error ? "FAILED " : "done ") << jobs[i].direction << ' '
                 << to_string(jobs[i].strategy) << " seed " << jobs[i].seed
                 << (outcomes[i].error ? ": " + *outcomes[i].error : std::string{}) << '\n';
    });

    std::vector<CurveRow> rows;
    std::map<std::string, std::vector<RunResult>> by_direction;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (outcomes[i].result) {
            const auto r = curve_rows(*outcomes[i].result, jobs[i].direction);
            rows.insert(rows.end(), r.begin(), r.end());
            by_direction[jobs[i].direction].push_back(*outcomes[i].result);
            res.runs.push_back(std::move(*outcomes[i].result));
        } else {
            res.failures.push_back(jobs[i].direction + "/" + to_string(jobs[i].strategy) + "/" +
                                   std::to_string(jobs[i].seed) + ": " + outcomes[i].error.value_or("unknown error"));
        }
    }
    write_file_atomic(opt.output_dir / "transfer_curves.csv", write_curve_csv(rows, true));

    for (const auto& d : directions) {
        const std::string system = c.system.empty() ? d.train->system : c.system;
        if (auto rep = detail::make_report(c, by_direction[d.name], system + " " + d.name, *opt.err)) {
            write_file_atomic(opt.output_dir / ("report_" + d.name + ".json"), report_to_json(*rep).dump(1) + "\n");
            write_file_atomic(opt.output_dir / ("report_" + d.name + ".csv"), report_to_csv(*rep));
            detail::print_report_table(*opt.out, *rep, rep->system + " final point");
        }
    }
    res.exit_code = res.failures.empty() ? 0 : 2;
    return res;
}

} // namespace albench
