#pragma once

// Multi-seed aggregation, Student t tests and the strategy comparison report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "albench/al_loop.hpp"
#include "albench/error.hpp"
#include "albench/io.hpp"
#include "albench/strategies.hpp"

namespace albench {

inline double mean(std::span<const double> x)
{
    double s = 0.0;
    for (const double v : x)
        s += v;
    return s / static_cast<double>(x.size());
}

/// Sample (n - 1) variance.
inline double sample_variance(std::span<const double> x)
{
    if (x.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(x);
    double s = 0.0;
    for (const double v : x)
        s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double sample_std(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

// ---------------------------------------------------------------------------
// Special functions

namespace detail {

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double incbeta_cf(double a, double b, double x)
{
    constexpr int max_iter = 300;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny)
        d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps)
            break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw ValidationError("incomplete beta: a and b must be positive");
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::incbeta_cf(a, b, x) / a;
    return 1.0 - front * detail::incbeta_cf(b, a, 1.0 - x) / b;
}

/// CDF of Student's t distribution with `df` (> 0, possibly fractional) degrees of freedom.
inline double student_t_cdf(double t, double df)
{
    if (!(df > 0.0))
        throw ValidationError("student_t_cdf: df must be positive");
    if (std::isinf(t))
        return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

/// Two-sided p-value P(|T| >= |t|).
inline double student_t_two_sided_p(double t, double df)
{
    if (std::isinf(t))
        return 0.0;
    return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// t tests

enum class TestKind { UnpairedWelch, Paired };

inline std::string to_string(TestKind k) { return k == TestKind::Paired ? "paired" : "unpaired_welch"; }

inline TestKind parse_test_kind(std::string_view s)
{
    if (s == "paired")
        return TestKind::Paired;
    if (s == "unpaired_welch" || s == "welch" || s == "unpaired")
        return TestKind::UnpairedWelch;
    throw ValidationError("unknown test kind '" + std::string(s) + "' (expected unpaired_welch or paired)");
}

struct TTestResult {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

/// Welch's unequal-variance t test or the paired t test, two-tailed.
/// A zero standard error gives p = 1 for equal means and p = 0 otherwise.
inline TTestResult t_test(std::span<const double> a, std::span<const double> b, TestKind kind)
{
    TTestResult r;
    if (kind == TestKind::Paired) {
        if (a.size() != b.size() || a.size() < 2)
            throw ValidationError("paired t test: need two samples of equal size >= 2");
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            d[i] = a[i] - b[i];
        const double md = mean(d);
        const double se = std::sqrt(sample_variance(d) / static_cast<double>(d.size()));
        r.df = static_cast<double>(d.size() - 1);
        if (se == 0.0) {
            r.statistic = md == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), md);
            r.p_value = md == 0.0 ? 1.0 : 0.0;
            return r;
        }
        r.statistic = md / se;
    } else {
        if (a.size() < 2 || b.size() < 2)
            throw ValidationError("Welch t test: each sample needs at least 2 values");
        const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
        const double va = sample_variance(a) / na, vb = sample_variance(b) / nb;
        const double diff = mean(a) - mean(b);
        const double se2 = va + vb;
        if (se2 == 0.0) {
            r.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
            r.df = na + nb - 2.0;
            r.p_value = diff == 0.0 ? 1.0 : 0.0;
            return r;
        }
        r.statistic = diff / std::sqrt(se2);
        r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    }
    r.p_value = student_t_two_sided_p(r.statistic, r.df);
    return r;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateCurve {
    Strategy strategy = Strategy::Random;
    std::vector<std::size_t> labeled_counts;
    std::vector<double> mae_mean, mae_std, r2_mean, r2_std;
    std::size_t n_seeds = 0;
};

/// Pointwise mean and sample standard deviation over runs of one strategy.
inline AggregateCurve aggregate(std::span<const RunResult> runs)
{
    if (runs.size() < 2)
        throw ValidationError("aggregate: need at least 2 runs");
    AggregateCurve out;
    out.strategy = runs.front().config.strategy;
    out.n_seeds = runs.size();
    for (const auto& rec : runs.front().curve)
        out.labeled_counts.push_back(rec.labeled_count);
    for (const auto& run : runs) {
        if (run.config.strategy != out.strategy)
            throw ValidationError("aggregate: runs mix strategies");
        if (run.curve.size() != out.labeled_counts.size())
            throw ValidationError("aggregate: runs have different schedules");
        for (std::size_t i = 0; i < run.curve.size(); ++i)
            if (run.curve[i].labeled_count != out.labeled_counts[i])
                throw ValidationError("aggregate: runs have different schedules");
    }
    std::vector<double> mae(runs.size()), r2(runs.size());
    for (std::size_t p = 0; p < out.labeled_counts.size(); ++p) {
        for (std::size_t k = 0; k < runs.size(); ++k) {
            mae[k] = runs[k].curve[p].mae;
            r2[k] = runs[k].curve[p].r2.value_or(std::numeric_limits<double>::quiet_NaN());
        }
        out.mae_mean.push_back(mean(mae));
        out.mae_std.push_back(sample_std(mae));
        out.r2_mean.push_back(mean(r2));
        out.r2_std.push_back(sample_std(r2));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Comparison report

enum class Status { Baseline, Better, Worse, Similar };

inline std::string to_string(Status s)
{
    switch (s) {
    case Status::Baseline: return "Baseline";
    case Status::Better: return "Better";
    case Status::Worse: return "Worse";
    case Status::Similar: return "Similar";
    }
    return "?";
}

inline Status parse_status(std::string_view s)
{
    for (const Status v : {Status::Baseline, Status::Better, Status::Worse, Status::Similar})
        if (to_string(v) == s)
            return v;
    throw ParseError("unknown status '" + std::string(s) + "'");
}

inline constexpr double kSignificanceLevel = 0.05;

struct SignificanceResult {
    Strategy strategy = Strategy::Random;
    double p_value = 1.0;
    TestKind test_kind = TestKind::UnpairedWelch;
    bool significant = false;
    Status direction = Status::Similar;
};

struct ReportRow {
    Strategy strategy = Strategy::Random;
    double final_mae_mean = 0.0;
    double final_mae_std = 0.0;
    double final_r2_mean = 0.0;
    double final_r2_std = 0.0;
    std::optional<double> p_value; // absent for the baseline
    Status status = Status::Similar;
};

struct ComparisonReport {
    std::string system;
    TestKind test_kind = TestKind::UnpairedWelch;
    std::string config_fingerprint;
    std::vector<AggregateCurve> curves;
    std::vector<ReportRow> rows;
};

/// Final-point MAE samples keyed by seed, per strategy.
using FinalMaeSamples = std::map<Strategy, std::map<std::uint64_t, double>>;

inline FinalMaeSamples final_mae_samples(std::span<const RunResult> runs)
{
    FinalMaeSamples out;
    for (const auto& r : runs)
        if (!r.curve.empty())
            out[r.config.strategy][r.config.seed] = r.curve.back().mae;
    return out;
}

inline SignificanceResult compare_to_baseline(Strategy strategy, const std::map<std::uint64_t, double>& candidate,
                                              const std::map<std::uint64_t, double>& baseline, TestKind kind)
{
    std::vector<double> a, b;
    if (kind == TestKind::Paired) {
        for (const auto& [seed, v] : candidate) {
            const auto it = baseline.find(seed);
            if (it == baseline.end())
                throw ValidationError("paired test: seed " + std::to_string(seed) + " missing from baseline");
            a.push_back(v);
            b.push_back(it->second);
        }
        if (a.size() != baseline.size())
            throw ValidationError("paired test: baseline and candidate seeds differ");
    } else {
        for (const auto& [seed, v] : candidate)
            a.push_back(v);
        for (const auto& [seed, v] : baseline)
            b.push_back(v);
    }
    SignificanceResult s;
    s.strategy = strategy;
    s.test_kind = kind;
    s.p_value = t_test(a, b, kind).p_value;
    s.significant = s.p_value < kSignificanceLevel;
    const double ma = mean(a), mb = mean(b);
    if (s.significant && ma < mb)
        s.direction = Status::Better;
    else if (s.significant && ma > mb)
        s.direction = Status::Worse;
    else
        s.direction = Status::Similar;
    return s;
}

/// Final-point table against the Random baseline.
inline ComparisonReport build_report(const std::string& system, std::span<const AggregateCurve> curves,
                                     const FinalMaeSamples& finals, TestKind kind,
                                     const std::string& fingerprint = {})
{
    const auto base_curve = std::find_if(curves.begin(), curves.end(),
                                         [](const AggregateCurve& c) { return c.strategy == Strategy::Random; });
    if (base_curve == curves.end() || !finals.contains(Strategy::Random))
        throw ValidationError("build_report: the random baseline is missing");
    if (std::count_if(curves.begin(), curves.end(),
                      [](const AggregateCurve& c) { return c.strategy == Strategy::Random; }) != 1)
        throw ValidationError("build_report: the random baseline appears more than once");

    ComparisonReport rep;
    rep.system = system;
    rep.test_kind = kind;
    rep.config_fingerprint = fingerprint;
    rep.curves.assign(curves.begin(), curves.end());
    for (const auto& c : curves) {
        if (c.labeled_counts.empty())
            throw ValidationError("build_report: empty curve for " + to_string(c.strategy));
        ReportRow row;
        row.strategy = c.strategy;
        row.final_mae_mean = c.mae_mean.back();
        row.final_mae_std = c.mae_std.back();
        row.final_r2_mean = c.r2_mean.back();
        row.final_r2_std = c.r2_std.back();
        if (c.strategy == Strategy::Random) {
            row.status = Status::Baseline;
        } else {
            const auto it = finals.find(c.strategy);
            if (it == finals.end())
                throw ValidationError("build_report: no final samples for " + to_string(c.strategy));
            const auto sig = compare_to_baseline(c.strategy, it->second, finals.at(Strategy::Random), kind);
            row.p_value = sig.p_value;
            row.status = sig.direction;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

inline nlohmann::json report_to_json(const ComparisonReport& rep)
{
    const auto reals = [](const std::vector<double>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const double x : v)
            a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
        return a;
    };
    const auto real = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& c : rep.curves)
        curves.push_back({{"strategy", to_string(c.strategy)},
                          {"n_seeds", c.n_seeds},
                          {"labeled_counts", c.labeled_counts},
                          {"mae_mean", reals(c.mae_mean)},
                          {"mae_std", reals(c.mae_std)},
                          {"r2_mean", reals(c.r2_mean)},
                          {"r2_std", reals(c.r2_std)}});
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"strategy", to_string(r.strategy)},
                        {"final_mae_mean", real(r.final_mae_mean)},
                        {"final_mae_std", real(r.final_mae_std)},
                        {"final_r2_mean", real(r.final_r2_mean)},
                        {"final_r2_std", real(r.final_r2_std)},
                        {"p_value", r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr)},
                        {"status", to_string(r.status)}});
    return {{"system", rep.system},
            {"test_kind", to_string(rep.test_kind)},
            {"significance_level", kSignificanceLevel},
            {"config_fingerprint", rep.config_fingerprint},
            {"curves", std::move(curves)},
            {"final", std::move(rows)}};
}

inline ComparisonReport report_from_json(const nlohmann::json& j)
{
    const auto real = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    const auto reals = [&](const nlohmann::json& a) {
        std::vector<double> out;
        for (const auto& v : a)
            out.push_back(real(v));
        return out;
    };
    try {
        ComparisonReport rep;
        rep.system = j.at("system").get<std::string>();
        rep.test_kind = parse_test_kind(j.at("test_kind").get<std::string>());
        rep.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        for (const auto& c : j.at("curves")) {
            AggregateCurve a;
            a.strategy = parse_strategy(c.at("strategy").get<std::string>());
            a.n_seeds = c.at("n_seeds").get<std::size_t>();
            a.labeled_counts = c.at("labeled_counts").get<std::vector<std::size_t>>();
            a.mae_mean = reals(c.at("mae_mean"));
            a.mae_std = reals(c.at("mae_std"));
            a.r2_mean = reals(c.at("r2_mean"));
            a.r2_std = reals(c.at("r2_std"));
            rep.curves.push_back(std::move(a));
        }
        for (const auto& r : j.at("final")) {
            ReportRow row;
            row.strategy = parse_strategy(r.at("strategy").get<std::string>());
            row.final_mae_mean = real(r.at("final_mae_mean"));
            row.final_mae_std = real(r.at("final_mae_std"));
            row.final_r2_mean = real(r.at("final_r2_mean"));
            row.final_r2_std = real(r.at("final_r2_std"));
            if (!r.at("p_value").is_null())
                row.p_value = r.at("p_value").get<double>();
            row.status = parse_status(r.at("status").get<std::string>());
            rep.rows.push_back(row);
        }
        return rep;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("report: ") + ex.what());
    }
}

inline constexpr std::string_view kReportCsvHeader =
    "strategy,final_mae_mean,final_mae_std,final_r2_mean,final_r2_std,p_value,status";

/// One formatted line per strategy; shared by the CSV file and the console table.
inline std::vector<std::string> report_row_fields(const ReportRow& r)
{
    return {to_string(r.strategy),        format_real(r.final_mae_mean), format_real(r.final_mae_std),
            format_real(r.final_r2_mean), format_real(r.final_r2_std),
            r.p_value ? format_real(*r.p_value) : std::string("-"), to_string(r.status)};
}

inline std::string report_to_csv(const ComparisonReport& rep)
{
    std::string out(kReportCsvHeader);
    out += '\n';
    for (const auto& r : rep.rows) {
        const auto f = report_row_fields(r);
        for (std::size_t i = 0; i < f.size(); ++i)
            out += (i ? "," : "") + f[i];
        out += '\n';
    }
    return out;
}

inline std::vector<ReportRow> read_report_csv(std::string_view text)
{
    std::vector<ReportRow> rows;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (++line_no == 1) {
            if (line != kReportCsvHeader)
                throw ParseError("report CSV: unexpected header");
            continue;
        }
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 7)
            throw ParseError("report CSV line " + std::to_string(line_no) + ": wrong field count");
        ReportRow r;
        r.strategy = parse_strategy(f[0]);
        r.final_mae_mean = parse_real(f[1]);
        r.final_mae_std = parse_real(f[2]);
        r.final_r2_mean = parse_real(f[3]);
        r.final_r2_std = parse_real(f[4]);
        if (f[5] != "-")
            r.p_value = parse_real(f[5]);
        r.status = parse_status(f[6]);
        rows.push_back(r);
    }
    return rows;
}

} // namespace albench
