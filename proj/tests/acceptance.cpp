// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
// Criteria 1, 2 and 8 share two full-size `albench run` invocations of
// configs/carbon.json (4 strategies x 5 seeds, default schedule and training).

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "albench/experiment.hpp"
#include "albench/synthetic.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace albench;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kMetricTol = 1e-12;
constexpr double kPValueTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetS = 10.0;
constexpr double kFullSystemBudgetS = 4.0 * 3600.0;
constexpr double kMemoryBudgetKiB = 8.0 * 1024.0 * 1024.0;
constexpr double kBenchmarkBudgetS = 600.0;
constexpr int kGradNets = 25;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failed checks inside one criterion.
struct Checker {
    Outcome out;
    int failures = 0;

    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            out.pass = false;
            if (++failures <= 3)
                out.detail += (out.detail.empty() ? "" : "; ") + what;
        }
    }
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.4g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

fs::path scratch_dir()
{
    static const fs::path p = [] {
        auto d = fs::temp_directory_path() / ("albench_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(ALBENCH_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Full-system runs shared by criteria 1, 2 and 8.
struct FullRun {
    fs::path out;
    int exit_code = -1;
    double seconds = 0.0;
};

const FullRun& full_run(int which)
{
    static FullRun runs[2];
    FullRun& r = runs[which];
    if (r.exit_code == -1) {
        r.out = scratch_dir() / ("full_" + std::to_string(which));
        const auto t0 = Clock::now();
        r.exit_code = run_cli("run " + source_path("configs/carbon.json").string() + " --out " + r.out.string(),
                              scratch_dir() / ("full_" + std::to_string(which) + ".log"));
        r.seconds = seconds_since(t0);
    }
    return r;
}

// ---------------------------------------------------------------------------

Outcome criterion_full_system()
{
    Checker c;
    const auto& r = full_run(0);
    rusage ru{};
    getrusage(RUSAGE_CHILDREN, &ru);
    const double peak_kib = static_cast<double>(ru.ru_maxrss);
    c.expect(r.exit_code == 0, "exit code " + std::to_string(r.exit_code));
    c.expect(r.seconds < kFullSystemBudgetS, "wall time " + fmt(r.seconds) + " s");
    c.expect(peak_kib < kMemoryBudgetKiB, "peak RSS " + fmt(peak_kib / 1024.0) + " MiB");
    std::size_t logs = 0;
    for (const char* s : {"random", "uncertainty", "diversity", "hybrid"})
        for (int seed = 0; seed < 5; ++seed)
            logs += fs::exists(r.out / "runs" / s / (std::to_string(seed) + ".json"));
    c.expect(logs == 20, std::to_string(logs) + "/20 run logs");
    for (const char* f : {"curves.csv", "report.json", "report.csv"})
        c.expect(fs::exists(r.out / f), std::string("missing ") + f);
    if (c.out.pass)
        c.out.detail = "600-record carbon-shaped manifest, 4x5 runs in " + fmt(r.seconds, "%.1f") +
                       " s, peak RSS " + fmt(peak_kib / 1024.0, "%.0f") + " MiB";
    return c.out;
}

Outcome criterion_schedule()
{
    Checker c;
    const auto& r = full_run(0);
    const std::vector<std::size_t> expected{30, 45, 60, 75, 90, 105};
    std::size_t checked = 0;
    for (const char* s : {"random", "uncertainty", "diversity", "hybrid"})
        for (int seed = 0; seed < 5; ++seed) {
            const auto path = r.out / "runs" / s / (std::to_string(seed) + ".json");
            if (!fs::exists(path)) {
                c.expect(false, "missing " + path.string());
                continue;
            }
            const auto log = nlohmann::json::parse(read_text_file(path));
            std::vector<std::size_t> counts;
            std::set<std::size_t> seen;
            bool disjoint = true;
            for (const auto i : log.at("initial_labeled").get<std::vector<std::size_t>>())
                disjoint &= seen.insert(i).second;
            for (const auto& it : log.at("iterations")) {
                counts.push_back(it.at("labeled_count").get<std::size_t>());
                for (const auto i : it.at("queried_indices").get<std::vector<std::size_t>>())
                    disjoint &= seen.insert(i).second;
            }
            const auto test = split(log.at("pool_size").get<std::size_t>() + log.at("test_size").get<std::size_t>(),
                                    0.8, static_cast<std::uint64_t>(seed))
                                  .test_indices;
            for (const auto t : test)
                disjoint &= !seen.count(t);
            const std::string tag = std::string(s) + "/" + std::to_string(seed);
            c.expect(counts == expected, tag + " labeled counts differ");
            c.expect(disjoint, tag + " labeled/queried/test sets overlap");
            c.expect(seen.size() == 105, tag + " labeled " + std::to_string(seen.size()));
            ++checked;
        }
    if (c.out.pass)
        c.out.detail = std::to_string(checked) + " runs: counts {30..105}, queries disjoint from each other and test";
    return c.out;
}

Outcome criterion_gradients()
{
    Checker c;
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int t = 0; t < kGradNets; ++t) {
        const auto g = make_grad_case(static_cast<std::uint64_t>(t));
        worst = std::max(worst, gradient_relative_error(g.params, g.X, g.y));
    }
    const double secs = seconds_since(t0);
    c.expect(worst < kGradTol, "max relative error " + fmt(worst));
    c.expect(secs < kGradBudgetS, "took " + fmt(secs) + " s");
    if (c.out.pass)
        c.out.detail = std::to_string(kGradNets) + " nets, max rel err " + fmt(worst, "%.2e") + ", " +
                       fmt(secs, "%.3f") + " s";
    return c.out;
}

Outcome criterion_oracles()
{
    Checker c;
    Rng rng(2024);

    // MAE and R^2 against long-double brute force.
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng.index(200);
        std::vector<double> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform(-4.0, 1.0);
            p[i] = y[i] + 0.3 * rng.normal();
        }
        long double abs_sum = 0, mean = 0, sse = 0, sst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            abs_sum += std::fabs(static_cast<long double>(p[i]) - y[i]);
            mean += y[i];
        }
        mean /= n;
        for (std::size_t i = 0; i < n; ++i) {
            sse += (static_cast<long double>(p[i]) - y[i]) * (static_cast<long double>(p[i]) - y[i]);
            sst += (y[i] - mean) * (y[i] - mean);
        }
        const auto e = evaluate_predictions(p, y);
        c.expect(std::abs(e.mae - static_cast<double>(abs_sum / n)) <= kMetricTol, "MAE mismatch");
        c.expect(e.r2 && std::abs(*e.r2 - static_cast<double>(1 - sse / sst)) <= kMetricTol, "R2 mismatch");
    }

    // Ensemble mean and variance of a trained ensemble against per-member forward passes.
    Matrix X(12, kNumFeatures);
    std::vector<double> y(12);
    for (std::size_t r = 0; r < 12; ++r) {
        for (auto& v : X.row(r))
            v = rng.normal();
        y[r] = rng.normal();
    }
    TrainHyperparams h;
    h.epochs = 5;
    const auto model = train_ensemble(X, y, h, 5, 99, NetShape{kNumFeatures, 16, 16});
    const auto pred = predict_batch(model, X);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        long double m = 0, v = 0;
        std::vector<long double> f;
        for (const auto& member : model.members)
            f.push_back(forward(member, X.row(r)));
        for (const auto x : f)
            m += x;
        m /= f.size();
        for (const auto x : f)
            v += (x - m) * (x - m);
        v /= f.size();
        c.expect(std::abs(pred.mean[r] - static_cast<double>(m)) <= kMetricTol, "ensemble mean mismatch");
        c.expect(std::abs(pred.variance[r] - static_cast<double>(v)) <= kMetricTol, "ensemble variance mismatch");
    }

    // Hybrid score against direct min-max arithmetic.
    for (int t = 0; t < 20; ++t) {
        std::vector<double> u(40), d(40);
        for (auto& v : u)
            v = rng.uniform(0.0, 0.2);
        for (auto& v : d)
            v = rng.uniform(0.0, 6.0);
        const double alpha = rng.uniform();
        const auto s = hybrid_scores(u, d, alpha);
        const auto [ulo, uhi] = std::minmax_element(u.begin(), u.end());
        const auto [dlo, dhi] = std::minmax_element(d.begin(), d.end());
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double want = alpha * (u[i] - *ulo) / (*uhi - *ulo) + (1 - alpha) * (d[i] - *dlo) / (*dhi - *dlo);
            c.expect(std::abs(s[i] - want) <= kMetricTol, "hybrid score mismatch");
        }
    }

    // p-values tabulated with scipy.stats (ttest_ind equal_var=False, ttest_rel).
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3.5, 3.9, 5.2, 6.1};
    const std::vector<double> x{0.262, 0.250, 0.271, 0.259, 0.268}, z{0.278, 0.283, 0.270, 0.289, 0.275, 0.281};
    const std::vector<double> base{0.30, 0.31, 0.29, 0.305, 0.295};
    std::vector<double> cand;
    for (const double v : base)
        cand.push_back(0.8 * v);
    struct Ref {
        const std::vector<double>* a;
        const std::vector<double>* b;
        TestKind kind;
        double p;
    };
    const Ref refs[] = {
        {&a, &b, TestKind::Paired, 0.00037834673373319014},
        {&a, &b, TestKind::UnpairedWelch, 0.2873995271516176},
        {&x, &z, TestKind::UnpairedWelch, 0.005609157567289762},
        {&cand, &base, TestKind::UnpairedWelch, 1.5348190800010476e-06},
        {&cand, &base, TestKind::Paired, 1.1563365147900264e-07},
    };
    double worst_p = 0.0;
    for (const auto& r : refs)
        worst_p = std::max(worst_p, std::abs(t_test(*r.a, *r.b, r.kind).p_value - r.p));
    c.expect(worst_p <= kPValueTol, "p-value error " + fmt(worst_p));
    if (c.out.pass)
        c.out.detail = "metrics/ensemble/hybrid within 1e-12, p-values within " + fmt(worst_p, "%.1e");
    return c.out;
}

Outcome criterion_strategy_contracts()
{
    Checker c;
    Rng rng(77);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 20 + rng.index(400);
        std::vector<double> u(n), d(n);
        for (auto& v : u)
            v = rng.uniform(0.0, 0.5);
        for (auto& v : d)
            v = rng.uniform(0.0, 5.0);
        c.expect(select_hybrid(u, d, 1.0, 15).indices == select_uncertainty(u, 15).indices, "hybrid(1) != uncertainty");
        c.expect(select_hybrid(u, d, 0.0, 15).indices == select_uncertainty(d, 15).indices, "hybrid(0) != distance");
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i)
            w[i] = std::exp(5.0 * u[i]) - 2.0;
        auto s1 = select_uncertainty(u, 15).indices, s2 = select_uncertainty(w, 15).indices;
        c.expect(s1 == s2, "uncertainty not invariant under increasing transform");

        Matrix pts(n, kNumFeatures);
        for (std::size_t r = 0; r < n; ++r)
            for (auto& v : pts.row(r))
                v = rng.normal();
        const auto seed = static_cast<std::uint64_t>(t);
        c.expect(select_random(n, 15, seed).indices == select_random(n, 15, seed).indices, "random not deterministic");
        c.expect(select_diversity(pts, 15, seed).indices == select_diversity(pts, 15, seed).indices,
                 "diversity not deterministic");
        c.expect(select_hybrid(u, d, 0.6, 15).indices == select_hybrid(u, d, 0.6, 15).indices,
                 "hybrid not deterministic");
    }
    if (c.out.pass)
        c.out.detail = "30 random pools: endpoints exact, monotone invariance, fixed-seed determinism";
    return c.out;
}

Outcome criterion_cluster_benchmark()
{
    Checker c;
    const auto bench = make_cluster_benchmark(0);
    const auto t0 = Clock::now();
    std::map<Strategy, double> final_mean;
    for (const auto s : kAllStrategies) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            ALRunConfig cfg;
            cfg.strategy = s;
            cfg.seed = seed;
            sum += run_al(cfg, bench.data).curve.back().mae;
        }
        final_mean[s] = sum / 5.0;
    }
    const double secs = seconds_since(t0);
    const double div = final_mean[Strategy::Diversity], rnd = final_mean[Strategy::Random];
    c.expect(div <= rnd, "diversity " + fmt(div) + " > random " + fmt(rnd));
    c.expect(secs < kBenchmarkBudgetS, "took " + fmt(secs) + " s");
    std::string summary;
    for (const auto s : kAllStrategies)
        summary += (summary.empty() ? "" : ", ") + to_string(s) + " " + fmt(final_mean[s]);
    c.out.detail = (c.out.pass ? "" : c.out.detail + " | ") + "final MAE " + summary + " in " + fmt(secs, "%.1f") +
                   " s";
    return c.out;
}

Outcome criterion_leak_freedom()
{
    Checker c;
    const auto m = load_manifest(test_data("carbon.json"));
    const Dataset data = build_dataset(deduplicate(filter_records(m.records)), FeatureSchema::standard());
    for (std::uint64_t seed : {0u, 1u}) {
        const auto s = split(data.size(), 0.8, seed);
        Dataset perturbed = data;
        for (const auto i : s.test_indices) {
            for (auto& v : perturbed.features.row(i))
                v = v * 7.0 - 50.0;
            perturbed.targets[i] += 3.0;
        }
        for (const auto st : kAllStrategies) {
            ALRunConfig cfg;
            cfg.strategy = st;
            cfg.seed = seed;
            cfg.train.epochs = 20;
            const auto a = run_al(cfg, data), b = run_al(cfg, perturbed);
            const std::string tag = to_string(st) + "/" + std::to_string(seed);
            c.expect(a.all_queried() == b.all_queried(), tag + " queried indices changed");
            c.expect(a.final_model && b.final_model &&
                         a.final_model->standardization == b.final_model->standardization,
                     tag + " standardization changed");
            c.expect(a.final_model == b.final_model, tag + " final ensemble changed");
        }
    }
    if (c.out.pass)
        c.out.detail = "test rows perturbed: queries, standardization and models unchanged (4 strategies x 2 seeds)";
    return c.out;
}

Outcome criterion_determinism()
{
    Checker c;
    const auto& a = full_run(0);
    const auto& b = full_run(1);
    c.expect(a.exit_code == 0 && b.exit_code == 0, "run failed");
    const auto ca = read_text_file(a.out / "curves.csv"), cb = read_text_file(b.out / "curves.csv");
    c.expect(ca == cb, "curves.csv differ");
    c.expect(read_text_file(a.out / "report.csv") == read_text_file(b.out / "report.csv"), "report.csv differ");
    if (c.out.pass)
        c.out.detail = "two `run` invocations: curves.csv (" + std::to_string(ca.size()) + " bytes) byte-identical";
    return c.out;
}

Outcome criterion_dataset_pipeline()
{
    Checker c;
    const auto m = load_manifest(test_data("carbon.json"));
    const auto kept = deduplicate(filter_records(m.records));
    c.expect(m.records.size() == 600 && kept.size() == 600, "carbon fixture retains " + std::to_string(kept.size()));
    const auto s = split(kept.size(), 0.8, 0);
    c.expect(s.pool_indices.size() == 480 && s.test_indices.size() == 120,
             "split " + std::to_string(s.pool_indices.size()) + "/" + std::to_string(s.test_indices.size()));

    // Planted pairs sit 1 and 2 eV/atom above every fixture energy so only the pair partners can match.
    double top = -1e300;
    for (const auto& r : kept)
        top = std::max(top, r.formation_energy_per_atom);
    auto recs = kept;
    const auto plant = [&](const MaterialRecord& like, const std::string& id, double e) {
        auto r = like;
        r.id = id;
        r.formation_energy_per_atom = e;
        recs.push_back(r);
    };
    plant(kept[5], "close-a", top + 1.0);
    plant(kept[5], "close-b", top + 1.0 + 0.0005);
    plant(kept[9], "far-a", top + 2.0);
    plant(kept[9], "far-b", top + 2.0 + 0.002);
    const auto out = deduplicate(recs, 0.001);
    std::set<std::string> ids;
    for (const auto& r : out)
        ids.insert(r.id);
    c.expect(ids.count("close-a") && !ids.count("close-b"), "0.5 meV duplicate not dropped");
    c.expect(ids.count("far-a") && ids.count("far-b"), "2 meV pair not kept");
    c.expect(out.size() == kept.size() + 3, "dedup removed " + std::to_string(recs.size() - out.size()) + " records");
    if (c.out.pass)
        c.out.detail = "600 -> 480/120; 0.5 meV pair deduplicated, 2 meV pair kept";
    return c.out;
}

} // namespace

// Optional arguments select criteria by number, e.g. `acceptance 3 9`.
int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> fn;
    };
    // Determinism runs the second full invocation, so it goes last.
    const std::vector<Criterion> criteria{
        {9, "dataset pipeline", criterion_dataset_pipeline},
        {3, "gradient correctness", criterion_gradients},
        {4, "metric and statistics oracles", criterion_oracles},
        {5, "strategy contracts", criterion_strategy_contracts},
        {7, "standardization leak-freedom", criterion_leak_freedom},
        {6, "synthetic cluster benchmark", criterion_cluster_benchmark},
        {1, "full system budget", criterion_full_system},
        {2, "loop bookkeeping", criterion_schedule},
        {8, "determinism", criterion_determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));
    std::map<int, std::pair<const char*, Outcome>> results;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id))
            continue;
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        std::cout << "criterion " << c.id << " [" << c.name << "]: " << (o.pass ? "PASS" : "FAIL") << " - "
                  << o.detail << std::endl;
        results[c.id] = {c.name, o};
    }
    int failed = 0;
    for (const auto& [id, r] : results)
        failed += !r.second.pass;
    std::cout << "acceptance: " << results.size() - failed << "/" << results.size() << " criteria passed"
              << std::endl;
    fs::remove_all(scratch_dir());
    return failed == 0 ? 0 : 1;
}
