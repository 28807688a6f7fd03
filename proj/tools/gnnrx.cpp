// gnnrx: experiment runner.
//
//   gnnrx simulate|train|exit|latency|validate-config CONFIG [--set key=value]... [-o FILE]
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical divergence.
// GNNRX_THREADS sets the worker count for sweep points (default 1).

#include "gnnrx/errors.hpp"
#include "gnnrx/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

int env_threads()
{
    const char* v = std::getenv("GNNRX_THREADS");
    if (!v || !*v) return 1;
    const int n = std::atoi(v);
    return n > 0 ? n : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"GNN-based detection and decoding for ISI channels"};
    app.require_subcommand(1);
    app.set_version_flag("--version", gnnrx::version_string());

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    gnnrx::RunOptions opt;
    long long steps = -1;
    bool show = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "key=value configuration file")->required();
        sub->add_option("--set", overrides, "override one key (key=value), repeatable");
        sub->add_option("-o,--output", output, "CSV output file (default: output.csv or stdout)");
    };
    auto* sim = app.add_subcommand("simulate", "BER/BLER/BMI sweep over channel.snr_db");
    auto* trn = app.add_subcommand("train", "train a GNN and write a checkpoint");
    auto* ext = app.add_subcommand("exit", "EXIT characteristic (and turbo trajectory)");
    auto* lat = app.add_subcommand("latency", "cycle counts with measured BER");
    auto* val = app.add_subcommand("validate-config", "check a configuration and print its resolved form");
    for (auto* s : {sim, trn, ext, lat, val}) add_common(s);
    trn->add_flag("--paper-budget", opt.paper_budget, "batch 256 and the paper's epoch count and SNR range");
    trn->add_option("--steps", steps, "override train.epochs");
    std::string resume;
    trn->add_option("--resume", resume, "resume from a checkpoint (same as --set train.resume=FILE)");
    trn->add_flag("--wall-time", opt.wall_time, "record wall-clock seconds (CSV no longer reproducible)");
    val->add_flag("--show", show, "print every resolved key");

    CLI11_PARSE(app, argc, argv);
    opt.threads = env_threads();
    if (steps >= 0) opt.steps = steps;
    if (!resume.empty()) overrides.push_back("train.resume=" + resume);

    try {
        const gnnrx::ExperimentConfig cfg = gnnrx::load_config_file(config_path, overrides);
        if (val->parsed()) {
            std::cout << "ok " << cfg.hash() << "\n";
            if (show) std::cout << cfg.canonical();
            return 0;
        }
        const std::string path = !output.empty() ? output : cfg.output_csv;
        std::ofstream file;
        if (!path.empty()) {
            file.open(path);
            if (!file) throw gnnrx::ConfigError("cannot write " + path);
        }
        std::ostream& out = path.empty() ? std::cout : file;
        if (sim->parsed()) gnnrx::run_simulate(cfg, out, opt);
        if (trn->parsed()) gnnrx::run_train(cfg, out, opt);
        if (ext->parsed()) gnnrx::run_exit(cfg, out, opt);
        if (lat->parsed()) gnnrx::run_latency(cfg, out, opt);
    } catch (const gnnrx::NumericalDivergence& e) {
        std::cerr << "gnnrx: numerical divergence: " << e.what() << "\n";
        return 3;
    } catch (const gnnrx::ConfigError& e) {
        std::cerr << "gnnrx: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "gnnrx: config error: " << e.what() << "\n";
        return 2;
    } catch (const gnnrx::BudgetExceeded& e) {
        std::cerr << "gnnrx: config error: " << e.what() << "\n";
        return 2;
    } catch (const gnnrx::ParseError& e) {
        std::cerr << "gnnrx: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "gnnrx: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
