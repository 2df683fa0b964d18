// albench: active-learning benchmark driver.
//
//   albench validate <config>
//   albench run <config> [--jobs N] [--out DIR] [--save-models]
//   albench transfer <config> [--jobs N] [--out DIR] [--save-models]
//   albench synth <system> <out.json> [--seed S] [--source MP|OQMD]
//
// Exit codes: 0 success, 1 configuration or validation error, 2 a run failed.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "albench/experiment.hpp"
#include "albench/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;

int do_validate(const std::string& config_path, albench::Mode mode)
{
    albench::ExperimentConfig cfg;
    try {
        cfg = albench::load_experiment_config(config_path);
    } catch (const std::exception& ex) {
        std::cout << "FAIL parse_error: " << ex.what() << '\n';
        return kExitConfig;
    }
    const auto issues = albench::validate_experiment(cfg, mode);
    for (const auto& i : issues)
        std::cout << "FAIL " << i.code << ": " << i.message << '\n';
    if (!issues.empty())
        return kExitConfig;
    std::cout << "OK " << cfg.strategies.size() << " strategies x " << cfg.seeds.size() << " seeds, labeled "
              << cfg.run.init_size << " -> " << cfg.run.final_labeled_count() << '\n';
    return kExitOk;
}

int do_run(const std::string& config_path, albench::Mode mode, unsigned jobs, const std::string& out_dir,
           bool save_models)
{
    albench::ExperimentConfig cfg;
    try {
        cfg = albench::load_experiment_config(config_path);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitConfig;
    }
    if (const auto issues = albench::validate_experiment(cfg, mode); !issues.empty()) {
        for (const auto& i : issues)
            std::cerr << "error " << i.code << ": " << i.message << '\n';
        return kExitConfig;
    }
    albench::DriverOptions opt;
    opt.output_dir = out_dir.empty() ? albench::default_output_dir(cfg) : std::filesystem::path(out_dir);
    opt.jobs = jobs;
    opt.save_models = save_models;
    try {
        const auto res = mode == albench::Mode::Run ? albench::run_experiment(cfg, opt)
                                                    : albench::run_transfer_experiment(cfg, opt);
        for (const auto& f : res.failures)
            std::cerr << "run failed: " << f << '\n';
        std::cerr << "artifacts written to " << opt.output_dir.string() << '\n';
        return res.exit_code == 0 ? kExitOk : kExitRun;
    } catch (const albench::ParseError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const albench::ValidationError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitRun;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Active-learning benchmark for formation-energy regression"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    unsigned jobs = 1;
    bool save_models = false;

    auto* validate = app.add_subcommand("validate", "Check a config and its manifests without training");
    validate->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    bool validate_transfer = false;
    validate->add_flag("--transfer", validate_transfer, "Validate as a transfer experiment");

    const auto add_run_options = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--jobs,-j", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
        sub->add_option("--out,-o", out_dir,
                        std::string("Output directory (default: config output_dir, $") + albench::kOutputDirEnv +
                            ", or ./albench_out)");
        sub->add_flag("--save-models", save_models, "Also write the final ensemble checkpoint of every run");
    };
    auto* run = app.add_subcommand("run", "Run every strategy x seed on one manifest");
    add_run_options(run);
    auto* transfer = app.add_subcommand("transfer", "Train on one manifest, test on the other, both directions");
    add_run_options(transfer);

    std::string system, synth_out, source;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic manifest with a named system's record counts");
    synth->add_option("system", system, "carbon, silicon, iron or ti-o")->required();
    synth->add_option("output", synth_out, "Manifest file to write")->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--source", source, "Keep only MP or OQMD records")->check(CLI::IsMember({"MP", "OQMD"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*validate)
        return do_validate(config_path, validate_transfer ? albench::Mode::Transfer : albench::Mode::Run);
    if (*run)
        return do_run(config_path, albench::Mode::Run, jobs, out_dir, save_models);
    if (*transfer)
        return do_run(config_path, albench::Mode::Transfer, jobs, out_dir, save_models);
    if (*synth) {
        try {
            auto m = albench::make_synthetic_manifest(albench::system_shape(system), synth_seed);
            if (!source.empty())
                m = albench::manifest_subset(m, albench::parse_source(source));
            albench::write_file_atomic(synth_out, albench::manifest_to_json(m).dump(1) + "\n");
            std::cout << "wrote " << m.records.size() << " records to " << synth_out << '\n';
            return kExitOk;
        } catch (const std::exception& ex) {
            std::cerr << "error: " << ex.what() << '\n';
            return kExitConfig;
        }
    }
    return kExitConfig;
}
