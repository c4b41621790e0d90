#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "modesim/modesim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

int run_command(const std::string& config_path, bool has_seed, std::uint64_t seed, bool has_trials,
                std::int64_t trials, const std::string& out_dir, bool analytic, bool mc, int threads,
                bool has_threads) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read config file '" << config_path << "'\n";
        return kExitIo;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    modesim::config::ExperimentConfig cfg;
    try {
        cfg = modesim::config::parse_config(buf.str());
    } catch (const modesim::config::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    if (has_seed) cfg.seed = seed;
    if (has_trials) cfg.trials = trials;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (analytic) cfg.mode = modesim::config::RunMode::analytic;
    if (mc) cfg.mode = modesim::config::RunMode::mc;
    if (has_threads) cfg.threads = threads;

    try {
        const modesim::runner::RunSummary summary = modesim::runner::run(cfg);
        std::cout << "wrote " << summary.results_path.string() << "\n";
        std::cout << "wrote " << summary.meta_path.string() << "\n";
        if (!summary.field_path.empty()) std::cout << "wrote " << summary.field_path.string() << "\n";
        std::cout << "wall time " << summary.wall_seconds << " s\n";
        return kExitOk;
    } catch (const modesim::config::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const modesim::io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modesim: classical simulation of mode-entangled interferometry"};
    app.set_version_flag("--version", std::string(modesim::kVersion));
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a config file");
    std::string config_path;
    std::uint64_t seed = 0;
    std::int64_t trials = 0;
    std::string out_dir;
    int threads = 0;
    bool analytic = false, mc = false;
    run_cmd->add_option("config", config_path, "Path to the experiment config")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the master seed");
    auto* trials_opt = run_cmd->add_option("--trials", trials, "Override the trial count");
    run_cmd->add_option("--out", out_dir, "Override the output directory");
    auto* threads_opt = run_cmd->add_option("--threads", threads, "Worker threads (0 = auto)");
    auto* analytic_flag = run_cmd->add_flag("--analytic", analytic, "Force closed-form evaluation");
    auto* mc_flag = run_cmd->add_flag("--mc", mc, "Force Monte Carlo evaluation");
    analytic_flag->excludes(mc_flag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    return run_command(config_path, seed_opt->count() > 0, seed, trials_opt->count() > 0, trials,
                       out_dir, analytic, mc, threads, threads_opt->count() > 0);
}
