#pragma once

// Experiment runner: flat key=value configuration, simulation sweeps, training
// runs, EXIT measurements and latency tables, all written as CSV.

#include "gnnrx/classical.hpp"
#include "gnnrx/gnn.hpp"
#include "gnnrx/link.hpp"
#include "gnnrx/metrics.hpp"
#include "gnnrx/training.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gnnrx {

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Version string written into every CSV comment line.
std::string version_string();

/// Parses `key = value` lines; '#' starts a comment. Duplicate keys throw ParseError with the line.
std::map<std::string, std::string> parse_key_values(std::string_view text);

enum class DetectorKind { bcjr, spa_ffg, spa_ufg, lmmse, gnn };
std::string to_string(DetectorKind k);
DetectorKind parse_detector_kind(std::string_view s);

struct ExperimentConfig {
    /// Every known key with its effective value, defaults included.
    std::map<std::string, std::string> values;

    std::uint64_t seed = 1;
    LinkSetup link;
    std::vector<double> snr_points;

    DetectorKind detector = DetectorKind::bcjr;
    SpaOptions spa;
    int decoder_iterations = 20;
    bool decoder_early_stop = true;
    int turbo_iterations = 1;
    long long max_frames = 1000;
    long long min_frame_errors = 100;

    GnnConfig gnn;
    bool gnn_joint = false;
    Schedule schedule = Schedule::flooding(10);
    std::string gnn_checkpoint;
    std::uint64_t gnn_init_seed = 1;

    TrainConfig train;
    bool pretrain = false;
    long long log_every = 1;
    long long checkpoint_every = 0;
    std::string resume;

    std::string exit_component = "detector";
    ExtrinsicMethod exit_method = ExtrinsicMethod::subtract;
    long long exit_samples = 200000;
    std::vector<double> exit_grid;
    double exit_snr_db = 10.0;
    int trajectory_iterations = 0;
    int trajectory_frames = 100;

    std::vector<std::string> latency_methods;
    std::vector<int> latency_iterations;
    double latency_snr_db = 10.0;
    bool latency_measure_ber = true;

    std::string output_csv;        // empty: the caller's stream
    std::string output_checkpoint;
    std::string output_trajectory;

    /// Canonical `key=value` lines over `values`, sorted by key.
    [[nodiscard]] std::string canonical() const;
    /// FNV-1a 64 of canonical(), 16 hex digits.
    [[nodiscard]] std::string hash() const;
};

/// Default value of every known key.
const std::map<std::string, std::string>& default_config_values();

/// Builds a configuration from file text plus `key=value` overrides (applied in order).
/// Unknown keys, malformed values, missing files and inconsistent settings throw ConfigError.
ExperimentConfig load_config(std::string_view text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides = {});

/// Receiver front end: transmission-order total LLRs from one observation and optional priors.
using DetectFn = std::function<LlrVector(const FrameInput&)>;

/// Detector of the configured kind; the GNN kinds need a model and its graph.
DetectFn make_detector(const ExperimentConfig& cfg, DetectorKind kind, std::shared_ptr<const GnnModel> model);

/// Model built from gnn.* keys; parameters loaded from gnn.checkpoint when set.
std::shared_ptr<GnnModel> load_gnn_model(const ExperimentConfig& cfg, bool require_checkpoint);

struct SimPoint {
    double snr_db = 0.0;
    double ber = 0.0;
    double bler = 0.0;
    double bmi = 0.0;
    long long frames = 0;
    std::uint64_t seed = 0;
    std::string status = "ok";
};

/// Monte-Carlo at one SNR until max_frames or min_frame_errors. BER and BLER count information
/// bits (transmitted bits when uncoded); BMI is measured on the first detector output.
SimPoint simulate_point(const ExperimentConfig& cfg, DetectorKind kind, std::shared_ptr<const GnnModel> model,
                        double snr_db, std::uint64_t seed);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; exceptions are rethrown in index order.
void run_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct RunOptions {
    int threads = 1;
    bool paper_budget = false;
    bool wall_time = false;
    /// Overrides train.epochs when set.
    std::optional<long long> steps;
};

/// train.* values, replaced by the paper's batch, epochs and SNR range under `paper_budget`, then `steps`.
TrainConfig effective_train_config(const ExperimentConfig& cfg, const RunOptions& opt);

/// CSV: snr_db,ber,bler,bmi,frames,detector,seed,status. Per-point seed = seed + index.
void run_simulate(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt = {});
/// CSV: step,loss,bmi,snr_db,wall_time. Writes output.checkpoint (plus a .conf sidecar).
/// NumericalDivergence propagates after the log is flushed.
void run_train(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt = {});
/// CSV: ia,ie,snr_db,component,method,samples; trajectory CSV to output.trajectory when requested.
void run_exit(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt = {});
/// CSV: method,iterations,cycles,ber.
void run_latency(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt = {});

/// `# config_hash=… seed=… version=…`
std::string csv_comment(const ExperimentConfig& cfg);

} // namespace gnnrx
