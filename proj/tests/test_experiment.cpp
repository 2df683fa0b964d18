#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "albench/experiment.hpp"
#include "test_support.hpp"

using namespace albench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
    {
        path = fs::temp_directory_path() / ("albench_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Small, fast experiment on the checked-in carbon manifest.
nlohmann::json small_config()
{
    return {{"system", "carbon"},
            {"manifest", test_data("carbon.json").string()},
            {"al", {{"ensemble_size", 2}, {"hidden_layers", {16, 16}}, {"n_query_rounds", 2}}},
            {"train", {{"epochs", 3}}},
            {"strategies", {"random", "diversity"}},
            {"seeds", {0, 1}}};
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j, const std::string& name = "cfg.json")
{
    const auto p = dir / name;
    std::ofstream(p) << j.dump(1);
    return p;
}

struct CliResult {
    int code;
    std::string out, err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch, const std::string& env = {})
{
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(ALBENCH_CLI_PATH) + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(out), read_text_file(err)};
}

std::vector<std::string> codes(const std::vector<ConfigIssue>& issues)
{
    std::vector<std::string> out;
    for (const auto& i : issues)
        out.push_back(i.code);
    return out;
}

bool has_code(const std::vector<ConfigIssue>& issues, const std::string& code)
{
    const auto c = codes(issues);
    return std::find(c.begin(), c.end(), code) != c.end();
}

} // namespace

// ---------------------------------------------------------------------------
// config parsing and validation

TEST(Config, ShippedConfigsValidate)
{
    const auto run_cfg = load_experiment_config(source_path("configs/carbon.json"));
    EXPECT_TRUE(validate_experiment(run_cfg, Mode::Run).empty());
    EXPECT_EQ(run_cfg.run.final_labeled_count(), 105u);
    const auto tr = load_experiment_config(source_path("configs/carbon_transfer.json"));
    EXPECT_TRUE(validate_experiment(tr, Mode::Transfer).empty());
    EXPECT_EQ(tr.test_kind, TestKind::Paired);
}

TEST(Config, DefaultsMatchBenchmarkProtocol)
{
    const auto c = parse_experiment_config({{"manifest", "x.json"}}, "/data");
    EXPECT_EQ(c.manifest, fs::path("/data/x.json"));
    EXPECT_EQ(c.run.init_size, 30u);
    EXPECT_EQ(c.run.batch_size, 15u);
    EXPECT_EQ(c.run.n_query_rounds, 5u);
    EXPECT_EQ(c.run.ensemble_size, 5u);
    EXPECT_EQ(c.run.alpha, 0.6);
    EXPECT_EQ(c.run.split_ratio, 0.8);
    EXPECT_EQ(c.run.train.epochs, 200);
    EXPECT_EQ(c.run.train.minibatch_size, 32);
    EXPECT_EQ(c.run.train.learning_rate, 1e-3);
    EXPECT_EQ(c.seeds.size(), 5u);
    EXPECT_EQ(c.strategies.size(), 4u);
    EXPECT_EQ(c.test_kind, TestKind::UnpairedWelch);
}

TEST(Config, UnknownKeyAndBadTypesAreParseErrors)
{
    EXPECT_THROW(parse_experiment_config({{"manifets", "x.json"}}, "."), ParseError);
    EXPECT_THROW(parse_experiment_config({{"seeds", "zero"}}, "."), ParseError);
    EXPECT_THROW(parse_experiment_config({{"al", {{"hidden_layers", {1, 2, 3}}}}}, "."), ParseError);
    EXPECT_THROW(parse_experiment_config({{"test_kind", "anova"}}, "."), ParseError);
}

TEST(Config, ValidationErrorCodes)
{
    auto j = small_config();
    const auto base = parse_experiment_config(j, ".");
    EXPECT_TRUE(validate_experiment(base, Mode::Run).empty());

    j["al"]["n_query_rounds"] = 40;
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "schedule"));

    j = small_config();
    j["seeds"] = {1, 1};
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "duplicate_seeds"));
    j["seeds"] = nlohmann::json::array();
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "no_seeds"));
    j["seeds"] = {-1};
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "negative_seed"));

    j = small_config();
    j["strategies"] = {"random", "greedy"};
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "unknown_strategy"));
    j["strategies"] = {"random", "random"};
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "duplicate_strategy"));

    j = small_config();
    j["al"]["alpha"] = 1.5;
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "bad_parameter"));

    j = small_config();
    j["manifest"] = "/nonexistent/carbon.json";
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Run), "manifest_error"));

    j = small_config();
    j["transfer"] = {{"a", test_data("carbon_mp.json").string()}};
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Transfer), "missing_manifest"));
}

TEST(Config, TransferScheduleCheckedPerDirection)
{
    auto j = small_config();
    j.erase("manifest");
    j["transfer"] = {{"a", test_data("carbon_mp.json").string()}, {"b", test_data("carbon_oqmd.json").string()}};
    j["al"]["n_query_rounds"] = 5;
    EXPECT_TRUE(has_code(validate_experiment(parse_experiment_config(j, "."), Mode::Transfer), "schedule"));
    j["al"]["n_query_rounds"] = 4;
    EXPECT_TRUE(validate_experiment(parse_experiment_config(j, "."), Mode::Transfer).empty());
}

TEST(Config, FingerprintIgnoresOutputDirOnly)
{
    auto j = small_config();
    const auto a = config_fingerprint(parse_experiment_config(j, "."));
    j["output_dir"] = "/tmp/elsewhere";
    EXPECT_EQ(config_fingerprint(parse_experiment_config(j, ".")), a);
    j["al"]["alpha"] = 0.5;
    EXPECT_NE(config_fingerprint(parse_experiment_config(j, ".")), a);
}

TEST(Config, PrepareManifestReportsCounts)
{
    const auto c = parse_experiment_config(small_config(), ".");
    const auto p = prepare_manifest(c.manifest, c);
    EXPECT_EQ(p.loaded, 600u);
    EXPECT_EQ(p.after_filter, 600u);
    EXPECT_EQ(p.after_dedup, 600u);
    EXPECT_EQ(p.data.size(), 600u);
}

// ---------------------------------------------------------------------------
// driver

TEST(Driver, WritesArtifactLayout)
{
    TempDir dir("layout");
    const auto c = parse_experiment_config(small_config(), ".");
    std::ostringstream out, err;
    DriverOptions opt{dir.path, 2, true, &out, &err};
    const auto res = run_experiment(c, opt);
    EXPECT_EQ(res.exit_code, 0);
    EXPECT_EQ(res.runs.size(), 4u);
    for (const char* s : {"random", "diversity"})
        for (const char* seed : {"0", "1"}) {
            const auto log = nlohmann::json::parse(read_text_file(dir.path / "runs" / s / (std::string(seed) + ".json")));
            EXPECT_EQ(log.at("status"), "ok");
            EXPECT_EQ(log.at("iterations").size(), 3u);
            EXPECT_TRUE(fs::exists(dir.path / "runs" / s / (std::string(seed) + ".model.json")));
        }
    const auto rows = read_curve_csv(read_text_file(dir.path / "curves.csv"));
    EXPECT_EQ(rows.size(), 12u);
    const auto rep = report_from_json(nlohmann::json::parse(read_text_file(dir.path / "report.json")));
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].status, Status::Baseline);
    EXPECT_EQ(rep.system, "carbon");
    EXPECT_EQ(rep.config_fingerprint, config_fingerprint(c));
}

TEST(Driver, PrintedTableMatchesReportCsv)
{
    TempDir dir("table");
    const auto c = parse_experiment_config(small_config(), ".");
    std::ostringstream out, err;
    run_experiment(c, DriverOptions{dir.path, 1, false, &out, &err});
    const auto rows = read_report_csv(read_text_file(dir.path / "report.csv"));
    std::istringstream table(out.str());
    std::string line;
    std::getline(table, line); // title
    std::getline(table, line); // header
    for (const auto& r : rows) {
        ASSERT_TRUE(std::getline(table, line));
        std::istringstream fields(line);
        std::vector<std::string> got{std::istream_iterator<std::string>(fields), {}};
        auto want = report_row_fields(r);
        EXPECT_EQ(got, want);
    }
}

TEST(Driver, ResultsDoNotDependOnJobCount)
{
    TempDir a("jobs1"), b("jobs3");
    const auto c = parse_experiment_config(small_config(), ".");
    std::ostringstream sink;
    run_experiment(c, DriverOptions{a.path, 1, false, &sink, &sink});
    run_experiment(c, DriverOptions{b.path, 3, false, &sink, &sink});
    EXPECT_EQ(read_text_file(a.path / "curves.csv"), read_text_file(b.path / "curves.csv"));
    EXPECT_EQ(read_text_file(a.path / "report.csv"), read_text_file(b.path / "report.csv"));
}

TEST(Driver, TransferWritesBothDirections)
{
    TempDir dir("transfer");
    auto j = small_config();
    j.erase("manifest");
    j["transfer"] = {{"a", test_data("carbon_mp.json").string()}, {"b", test_data("carbon_oqmd.json").string()}};
    const auto c = parse_experiment_config(j, ".");
    std::ostringstream out, err;
    const auto res = run_transfer_experiment(c, DriverOptions{dir.path, 2, false, &out, &err});
    EXPECT_EQ(res.exit_code, 0);
    EXPECT_EQ(res.runs.size(), 8u);
    const auto rows = read_curve_csv(read_text_file(dir.path / "transfer_curves.csv"));
    EXPECT_EQ(rows.size(), 24u);
    EXPECT_EQ(rows.front().direction, "a_to_b");
    EXPECT_EQ(rows.back().direction, "b_to_a");
    for (const char* d : {"a_to_b", "b_to_a"}) {
        EXPECT_TRUE(fs::exists(dir.path / ("report_" + std::string(d) + ".json")));
        EXPECT_TRUE(fs::exists(dir.path / ("report_" + std::string(d) + ".csv")));
        EXPECT_TRUE(fs::exists(dir.path / "runs" / d / "random" / "0.json"));
    }
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, ValidateExitCodes)
{
    TempDir dir("cli_validate");
    auto r = run_cli("validate " + source_path("configs/carbon.json").string(), dir.path);
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_EQ(r.out.rfind("OK", 0), 0u) << r.out;

    auto j = small_config();
    j["al"]["n_query_rounds"] = 40;
    r = run_cli("validate " + write_config(dir.path, j).string(), dir.path);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL schedule"), std::string::npos) << r.out;

    j = small_config();
    j["seeds"] = {3, 3};
    r = run_cli("validate " + write_config(dir.path, j).string(), dir.path);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL duplicate_seeds"), std::string::npos) << r.out;

    std::ofstream(dir.path / "broken.json") << "{\n \"seeds\": [0,\n}";
    r = run_cli("validate " + (dir.path / "broken.json").string(), dir.path);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("broken.json:3"), std::string::npos) << r.out;
}

TEST(Cli, RunHonoursOutputDirEnvAndSucceeds)
{
    TempDir dir("cli_run");
    auto j = small_config();
    j["strategies"] = {"random"};
    const auto cfg = write_config(dir.path, j);
    const auto outdir = dir.path / "from_env";
    const auto r = run_cli("run " + cfg.string(), dir.path, std::string(kOutputDirEnv) + "=" + outdir.string());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(outdir / "curves.csv"));
    EXPECT_TRUE(fs::exists(outdir / "report.json"));
    EXPECT_NE(r.out.find("random"), std::string::npos);
}

TEST(Cli, DivergentTrainingExitsWithRunFailure)
{
    TempDir dir("cli_fail");
    auto j = small_config();
    j["train"]["learning_rate"] = 1e300;
    j["train"]["epochs"] = 20;
    const auto r = run_cli("run " + write_config(dir.path, j).string() + " --out " + (dir.path / "o").string(),
                           dir.path);
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("run failed"), std::string::npos) << r.err;
    const auto log = nlohmann::json::parse(read_text_file(dir.path / "o" / "runs" / "random" / "0.json"));
    EXPECT_EQ(log.at("status"), "failed");
}

TEST(Cli, BadArgumentsExitWithConfigError)
{
    TempDir dir("cli_args");
    EXPECT_EQ(run_cli("", dir.path).code, 1);
    EXPECT_EQ(run_cli("run /nonexistent/config.json", dir.path).code, 1);
    EXPECT_EQ(run_cli("frobnicate", dir.path).code, 1);
}

TEST(Cli, SynthWritesLoadableManifest)
{
    TempDir dir("cli_synth");
    const auto path = dir.path / "iron.json";
    const auto r = run_cli("synth iron " + path.string() + " --seed 4 --source OQMD", dir.path);
    EXPECT_EQ(r.code, 0) << r.err;
    const auto m = load_manifest(path);
    EXPECT_EQ(m.records.size(), 32u);
}
