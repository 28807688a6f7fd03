#include "gnnrx/experiment.hpp"

#include "gnnrx/errors.hpp"
#include "gnnrx/nn/checkpoint.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#ifndef GNNRX_VERSION
#define GNNRX_VERSION "unknown"
#endif

namespace gnnrx {

std::string version_string() { return GNNRX_VERSION; }

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        const std::string item = trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (!item.empty()) out.push_back(item);
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

// Ten significant digits keep CSVs stable across runs.
std::string fmt(double v)
{
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const long long d = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// "a,b,c" or "start:step:stop" (inclusive).
std::vector<double> to_grid(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        const auto parts = split(v, ':');
        if (parts.size() != 3) throw ConfigError(key + ": range must be start:step:stop");
        const double a = to_double(key, parts[0]);
        const double s = to_double(key, parts[1]);
        const double b = to_double(key, parts[2]);
        if (!(s > 0.0) || b < a) throw ConfigError(key + ": range needs a positive step and start <= stop");
        for (long long i = 0; a + static_cast<double>(i) * s <= b + 1e-9 * s; ++i) out.push_back(a + static_cast<double>(i) * s);
    } else {
        for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
    }
    if (out.empty()) throw ConfigError(key + ": empty grid");
    return out;
}

DetectionGraphKind to_graph_kind(const std::string& key, const std::string& v)
{
    if (v == "ffg") return DetectionGraphKind::ffg;
    if (v == "ufg") return DetectionGraphKind::ufg;
    throw ConfigError(key + ": expected ffg or ufg, got '" + v + "'");
}

template <typename F>
auto convert(const std::string& key, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

} // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text)
{
    std::map<std::string, std::string> out;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string t = trim(line);
        if (!t.empty()) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
            const std::string key = trim(std::string_view(t).substr(0, eq));
            const std::string value = trim(std::string_view(t).substr(eq + 1));
            if (key.empty()) throw ParseError("empty key", line_no);
            if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", line_no);
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string to_string(DetectorKind k)
{
    switch (k) {
    case DetectorKind::bcjr: return "bcjr";
    case DetectorKind::spa_ffg: return "spa_ffg";
    case DetectorKind::spa_ufg: return "spa_ufg";
    case DetectorKind::lmmse: return "lmmse";
    case DetectorKind::gnn: return "gnn";
    }
    return "?";
}

DetectorKind parse_detector_kind(std::string_view s)
{
    for (auto k : {DetectorKind::bcjr, DetectorKind::spa_ffg, DetectorKind::spa_ufg, DetectorKind::lmmse, DetectorKind::gnn}) {
        if (s == to_string(k)) return k;
    }
    throw ConfigError("unknown detector kind '" + std::string(s) + "'");
}

const std::map<std::string, std::string>& default_config_values()
{
    static const std::map<std::string, std::string> d = {
        {"seed", "1"},
        {"channel.cir", "proakis-c"},
        {"channel.modulation", "2"},
        {"channel.num_symbols", "64"},
        {"channel.random", "false"},
        {"channel.csi_error_variance", "0"},
        {"channel.snr_axis", "esn0"},
        {"channel.snr_db", "10"},
        {"code.alist", ""},
        {"code.puncture", ""},
        {"code.interleaver_seed", "1"},
        {"detector.kind", "bcjr"},
        {"detector.iterations", "10"},
        {"detector.damping", "1"},
        {"decoder.iterations", "20"},
        {"decoder.early_stop", "true"},
        {"receiver.turbo_iterations", "1"},
        {"sim.max_frames", "1000"},
        {"sim.min_frame_errors", "100"},
        {"gnn.variant", "gnn"},
        {"gnn.embedding", "linear"},
        {"gnn.graph", "ffg"},
        {"gnn.feature_size", "16"},
        {"gnn.hidden_layers", "2"},
        {"gnn.hidden_units", "64"},
        {"gnn.embed_noise_variance", "true"},
        {"gnn.prior_embedding", "false"},
        {"gnn.joint", "false"},
        {"gnn.schedule", "10"},
        {"gnn.checkpoint", ""},
        {"gnn.init_seed", "1"},
        {"train.batch_size", "128"},
        {"train.epochs", "20000"},
        {"train.snr_min_db", "10"},
        {"train.snr_max_db", "14"},
        {"train.learning_rate", "0.0001"},
        {"train.loss", "multi"},
        {"train.pretrain", "false"},
        {"train.ia_min", "0"},
        {"train.ia_max", "1"},
        {"train.log_every", "1"},
        {"train.checkpoint_every", "0"},
        {"train.resume", ""},
        {"exit.component", "detector"},
        {"exit.method", "subtract"},
        {"exit.samples", "200000"},
        {"exit.ia_grid", "default"},
        {"exit.snr_db", "10"},
        {"exit.trajectory_iterations", "0"},
        {"exit.trajectory_frames", "100"},
        {"latency.methods", "gnn,spa,bcjr"},
        {"latency.iterations", "1,2,4,8"},
        {"latency.snr_db", "10"},
        {"latency.measure_ber", "true"},
        {"output.csv", ""},
        {"output.checkpoint", "model.ckpt"},
        {"output.trajectory", ""},
    };
    return d;
}

std::string ExperimentConfig::canonical() const
{
    std::string s;
    for (const auto& [k, v] : values) s += k + "=" + v + "\n";
    return s;
}

std::string ExperimentConfig::hash() const
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig load_config(std::string_view text, const std::vector<std::string>& overrides)
{
    std::map<std::string, std::string> given;
    try {
        given = parse_key_values(text);
        for (const auto& o : overrides) {
            const auto kv = parse_key_values(o);
            if (kv.size() != 1) throw ConfigError("override must be key=value: '" + o + "'");
            given[kv.begin()->first] = kv.begin()->second;
        }
    } catch (const ParseError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig c;
    c.values = default_config_values();
    for (const auto& [k, v] : given) {
        if (!c.values.contains(k)) throw ConfigError("unknown key '" + k + "'");
        c.values[k] = v;
    }
    const auto& V = c.values;
    auto S = [&](const char* k) { return V.at(k); };
    auto D = [&](const char* k) { return to_double(k, V.at(k)); };
    auto I = [&](const char* k) { return to_int(k, V.at(k)); };
    auto B = [&](const char* k) { return to_bool(k, V.at(k)); };

    c.seed = static_cast<std::uint64_t>(I("seed"));

    // Channel and code.
    c.link.cir = convert("channel.cir", [&] { return parse_cir(S("channel.cir")); });
    c.link.modulation_order = static_cast<int>(I("channel.modulation"));
    convert("channel.modulation", [&] { return Constellation(c.link.modulation_order).order(); });
    c.link.num_symbols = static_cast<int>(I("channel.num_symbols"));
    c.link.random_channel = B("channel.random");
    c.link.csi_error_variance = D("channel.csi_error_variance");
    if (c.link.csi_error_variance < 0.0) throw ConfigError("channel.csi_error_variance must be >= 0");
    const std::string axis = S("channel.snr_axis");
    if (axis == "esn0") {
        c.link.snr_axis = SnrAxis::es_n0;
    } else if (axis == "ebn0") {
        c.link.snr_axis = SnrAxis::eb_n0;
    } else {
        throw ConfigError("channel.snr_axis: expected esn0 or ebn0");
    }
    c.snr_points = to_grid("channel.snr_db", S("channel.snr_db"));
    if (!S("code.alist").empty()) {
        const std::string path = S("code.alist");
        if (!std::filesystem::exists(path)) throw ConfigError("code.alist: file not found: " + path);
        auto pcm = convert("code.alist", [&] { return load_alist_file(path); });
        if (!S("code.puncture").empty()) {
            std::vector<int> cols;
            for (const auto& p : split(S("code.puncture"), ',')) cols.push_back(static_cast<int>(to_int("code.puncture", p)));
            convert("code.puncture", [&] {
                pcm.set_punctured(cols);
                return 0;
            });
        }
        convert("code.alist", [&] {
            c.link.attach_code(std::make_shared<const ParityCheckMatrix>(std::move(pcm)),
                               static_cast<std::uint64_t>(I("code.interleaver_seed")));
            return 0;
        });
    } else if (c.link.num_symbols < 1) {
        throw ConfigError("channel.num_symbols must be positive for an uncoded link");
    }

    // Receiver.
    c.detector = convert("detector.kind", [&] { return parse_detector_kind(S("detector.kind")); });
    c.spa.iterations = static_cast<int>(I("detector.iterations"));
    c.spa.damping = D("detector.damping");
    if (c.spa.iterations < 1) throw ConfigError("detector.iterations must be positive");
    if (!(c.spa.damping > 0.0 && c.spa.damping <= 1.0)) throw ConfigError("detector.damping must lie in (0, 1]");
    c.decoder_iterations = static_cast<int>(I("decoder.iterations"));
    c.decoder_early_stop = B("decoder.early_stop");
    c.turbo_iterations = static_cast<int>(I("receiver.turbo_iterations"));
    if (c.decoder_iterations < 1 || c.turbo_iterations < 1) throw ConfigError("iteration counts must be positive");
    if (c.turbo_iterations > 1 && c.detector == DetectorKind::lmmse) {
        throw ConfigError("receiver.turbo_iterations > 1 needs a detector that accepts priors (not lmmse)");
    }
    c.max_frames = I("sim.max_frames");
    c.min_frame_errors = I("sim.min_frame_errors");
    if (c.max_frames < 1 || c.min_frame_errors < 1) throw ConfigError("sim budgets must be positive");

    // GNN.
    c.gnn.variant = convert("gnn.variant", [&] { return parse_variant(S("gnn.variant")); });
    c.gnn.embedding = convert("gnn.embedding", [&] { return parse_embedding(S("gnn.embedding")); });
    c.gnn.graph = to_graph_kind("gnn.graph", S("gnn.graph"));
    c.gnn.feature_size = static_cast<int>(I("gnn.feature_size"));
    c.gnn.hidden_layers = static_cast<int>(I("gnn.hidden_layers"));
    c.gnn.hidden_units = static_cast<int>(I("gnn.hidden_units"));
    c.gnn.embed_noise_variance = B("gnn.embed_noise_variance");
    c.gnn.prior_embedding = B("gnn.prior_embedding");
    c.gnn.modulation_order = c.link.modulation_order;
    c.gnn.memory = c.link.cir.memory();
    c.gnn.num_symbols = c.link.symbols();
    c.gnn_joint = B("gnn.joint");
    c.gnn.check_nodes = c.gnn_joint;
    if (c.gnn_joint && !c.link.coded()) throw ConfigError("gnn.joint needs code.alist");
    if (c.gnn.feature_size < 1 || c.gnn.hidden_layers < 0 || c.gnn.hidden_units < 1) {
        throw ConfigError("gnn sizes must be positive");
    }
    c.schedule = convert("gnn.schedule", [&] { return Schedule::parse(S("gnn.schedule")); });
    c.gnn_checkpoint = S("gnn.checkpoint");
    if (!c.gnn_checkpoint.empty() && !std::filesystem::exists(c.gnn_checkpoint)) {
        throw ConfigError("gnn.checkpoint: file not found: " + c.gnn_checkpoint);
    }
    c.gnn_init_seed = static_cast<std::uint64_t>(I("gnn.init_seed"));

    // Training.
    c.train.batch_size = static_cast<int>(I("train.batch_size"));
    c.train.epochs = I("train.epochs");
    c.train.snr_min_db = D("train.snr_min_db");
    c.train.snr_max_db = D("train.snr_max_db");
    c.train.learning_rate = D("train.learning_rate");
    const std::string loss = S("train.loss");
    if (loss == "multi") {
        c.train.loss = LossKind::multi;
    } else if (loss == "bce") {
        c.train.loss = LossKind::bce;
    } else {
        throw ConfigError("train.loss: expected multi or bce");
    }
    c.train.schedule = c.schedule;
    c.train.seed = c.seed;
    c.train.ia_min = D("train.ia_min");
    c.train.ia_max = D("train.ia_max");
    convert("train", [&] {
        c.train.validate();
        return 0;
    });
    c.pretrain = B("train.pretrain");
    if (c.pretrain && !c.gnn.prior_embedding) throw ConfigError("train.pretrain needs gnn.prior_embedding = true");
    c.log_every = I("train.log_every");
    c.checkpoint_every = I("train.checkpoint_every");
    if (c.log_every < 1 || c.checkpoint_every < 0) throw ConfigError("train.log_every must be positive");
    c.resume = S("train.resume");
    if (!c.resume.empty() && !std::filesystem::exists(c.resume)) throw ConfigError("train.resume: file not found: " + c.resume);

    // EXIT.
    c.exit_component = S("exit.component");
    if (c.exit_component != "detector" && c.exit_component != "decoder") {
        throw ConfigError("exit.component: expected detector or decoder");
    }
    if (c.exit_component == "decoder" && !c.link.coded()) throw ConfigError("exit.component = decoder needs code.alist");
    c.exit_method = convert("exit.method", [&] { return parse_extrinsic_method(S("exit.method")); });
    c.exit_samples = I("exit.samples");
    if (c.exit_samples < 1) throw ConfigError("exit.samples must be positive");
    c.exit_grid = S("exit.ia_grid") == "default" ? default_ia_grid() : to_grid("exit.ia_grid", S("exit.ia_grid"));
    for (double g : c.exit_grid) {
        if (!(g >= 0.0 && g < 1.0)) throw ConfigError("exit.ia_grid values must lie in [0, 1)");
    }
    if (!std::is_sorted(c.exit_grid.begin(), c.exit_grid.end())) throw ConfigError("exit.ia_grid must be sorted");
    c.exit_snr_db = D("exit.snr_db");
    c.trajectory_iterations = static_cast<int>(I("exit.trajectory_iterations"));
    c.trajectory_frames = static_cast<int>(I("exit.trajectory_frames"));
    if (c.trajectory_iterations < 0 || c.trajectory_frames < 1) throw ConfigError("exit trajectory counts out of range");
    if (c.trajectory_iterations > 0 && !c.link.coded()) throw ConfigError("exit.trajectory_iterations needs code.alist");

    // Latency.
    c.latency_methods = split(S("latency.methods"), ',');
    if (c.latency_methods.empty()) throw ConfigError("latency.methods is empty");
    for (const auto& m : c.latency_methods) {
        if (m != "gnn" && m != "fgnn" && m != "spa" && m != "bcjr") {
            throw ConfigError("latency.methods: unknown method '" + m + "'");
        }
    }
    for (const auto& p : split(S("latency.iterations"), ',')) {
        c.latency_iterations.push_back(static_cast<int>(to_int("latency.iterations", p)));
        if (c.latency_iterations.back() < 1) throw ConfigError("latency.iterations must be positive");
    }
    if (c.latency_iterations.empty()) throw ConfigError("latency.iterations is empty");
    c.latency_snr_db = D("latency.snr_db");
    c.latency_measure_ber = B("latency.measure_ber");

    c.output_csv = S("output.csv");
    c.output_checkpoint = S("output.checkpoint");
    c.output_trajectory = S("output.trajectory");
    return c;
}

ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str(), overrides);
}

std::string csv_comment(const ExperimentConfig& cfg)
{
    return "# config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed) + " version=" + version_string();
}

std::shared_ptr<GnnModel> load_gnn_model(const ExperimentConfig& cfg, bool require_checkpoint)
{
    auto m = std::make_shared<GnnModel>(cfg.gnn, cfg.gnn_init_seed);
    if (cfg.gnn_checkpoint.empty()) {
        if (require_checkpoint) throw ConfigError("the gnn detector needs gnn.checkpoint");
        return m;
    }
    try {
        nn::load_checkpoint_file(cfg.gnn_checkpoint, m->params(), nullptr);
    } catch (const std::exception& e) {
        throw ConfigError("gnn.checkpoint: " + std::string(e.what()));
    }
    return m;
}

DetectFn make_detector(const ExperimentConfig& cfg, DetectorKind kind, std::shared_ptr<const GnnModel> model)
{
    const Constellation con(cfg.link.modulation_order);
    const int nx = cfg.link.symbols();
    const int L = cfg.link.cir.memory();
    switch (kind) {
    case DetectorKind::bcjr:
        return [con](const FrameInput& f) { return bcjr_detect(f.y, f.cir, f.noise_variance, con, f.prior); };
    case DetectorKind::spa_ffg: {
        auto g = std::make_shared<const BipartiteGraph>(build_ffg(nx, L));
        const SpaOptions opt = cfg.spa;
        return [con, g, opt](const FrameInput& f) {
            return spa_detect_ffg(*g, f.y, f.cir, f.noise_variance, con, opt, f.prior).per_iteration.back();
        };
    }
    case DetectorKind::spa_ufg: {
        auto g = std::make_shared<const BipartiteGraph>(build_ufg(nx, L));
        const SpaOptions opt = cfg.spa;
        return [con, g, opt, nx, L](const FrameInput& f) {
            const UfgStatistics st = ufg_statistics(build_channel_matrix(f.cir, nx), f.y, L);
            return spa_detect_ufg(*g, st, L, f.noise_variance, con, opt, f.prior).per_iteration.back();
        };
    }
    case DetectorKind::lmmse:
        return [con, nx, L](const FrameInput& f) {
            return lmmse_detect(f.y, build_channel_matrix(f.cir, nx), L, f.noise_variance, con).llrs;
        };
    case DetectorKind::gnn: {
        if (!model) throw ConfigError("the gnn detector needs a model");
        if (cfg.gnn_joint) throw ConfigError("a joint GNN is not a stand-alone detector");
        auto g = std::make_shared<const BipartiteGraph>(build_link_graph(cfg.link, cfg.gnn.graph, false));
        const int it = cfg.schedule.total_iterations();
        return [model, g, it](const FrameInput& f) { return gnn_detect(*model, *g, f, it).back(); };
    }
    }
    throw ConfigError("unknown detector");
}

namespace {

struct PointAccumulator {
    long long frames = 0;
    long long frame_errors = 0;
    long long bit_errors = 0;
    long long bits = 0;
    double bmi_sum = 0.0; // Σ per-frame raw BMI · bit count
    long long bmi_bits = 0;

    void add_bmi(const Bits& ref, const std::vector<double>& llr)
    {
        bmi_sum += bmi_estimate_raw(ref, llr) * static_cast<double>(ref.size());
        bmi_bits += static_cast<long long>(ref.size());
    }
    void add_decisions(const Bits& ref, const Bits& dec)
    {
        long long e = 0;
        for (std::size_t i = 0; i < ref.size(); ++i) e += ref[i] != dec[i];
        bit_errors += e;
        bits += static_cast<long long>(ref.size());
        frame_errors += e > 0;
        ++frames;
    }
};

Bits pick(const Bits& v, const std::vector<int>& idx)
{
    Bits out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
    return out;
}

} // namespace

SimPoint simulate_point(const ExperimentConfig& cfg, DetectorKind kind, std::shared_ptr<const GnnModel> model,
                        double snr_db, std::uint64_t seed)
{
    SimPoint p;
    p.snr_db = snr_db;
    p.seed = seed;
    const LinkSetup& link = cfg.link;
    const bool joint = kind == DetectorKind::gnn && cfg.gnn_joint;
    DetectFn detect;
    std::shared_ptr<const BipartiteGraph> joint_graph;
    if (joint) {
        joint_graph = std::make_shared<const BipartiteGraph>(build_link_graph(link, cfg.gnn.graph, true));
    } else {
        detect = make_detector(cfg, kind, model);
    }
    Rng rng(seed);
    PointAccumulator acc;
    try {
        while (acc.frames < cfg.max_frames && acc.frame_errors < cfg.min_frame_errors) {
            LinkFrame f = draw_frame(link, snr_db, rng);
            if (joint) {
                const LlrVector out = jdd_infer(*model, *joint_graph, f.rx, cfg.schedule).back();
                acc.add_bmi(f.code_bits, out.values);
                const Bits dec = hard_decisions(out.values);
                acc.add_decisions(pick(f.code_bits, link.encoder->info_positions()), pick(dec, link.encoder->info_positions()));
                continue;
            }
            if (!link.coded()) {
                const LlrVector out = detect(f.rx);
                acc.add_bmi(f.tx_bits, out.values);
                acc.add_decisions(f.tx_bits, hard_decisions(out.values));
                continue;
            }
            std::vector<double> prior(f.tx_bits.size(), 0.0);
            std::vector<double> post;
            for (int t = 0; t < cfg.turbo_iterations; ++t) {
                if (t > 0) f.rx.prior = LlrVector(prior, LlrRole::prior);
                const LlrVector tot = detect(f.rx);
                if (t == 0) acc.add_bmi(f.tx_bits, tot.values);
                std::vector<double> ext(tot.size());
                for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = saturate(tot[i] - prior[i]);
                const std::vector<double> ch = tx_to_code_order(link, ext);
                post = spa_decode(*link.code, LlrVector(ch, LlrRole::extrinsic), cfg.decoder_iterations,
                                  cfg.decoder_early_stop)
                           .posterior.values;
                std::vector<double> back(ch.size());
                for (std::size_t i = 0; i < ch.size(); ++i) back[i] = saturate(post[i] - ch[i]);
                prior = code_to_tx_order(link, back);
            }
            acc.add_decisions(pick(f.code_bits, link.encoder->info_positions()),
                              pick(hard_decisions(post), link.encoder->info_positions()));
        }
    } catch (const NumericalDivergence&) {
        p.status = "diverged";
    }
    p.frames = acc.frames;
    p.ber = acc.bits ? static_cast<double>(acc.bit_errors) / static_cast<double>(acc.bits) : std::nan("");
    p.bler = acc.frames ? static_cast<double>(acc.frame_errors) / static_cast<double>(acc.frames) : std::nan("");
    p.bmi = acc.bmi_bits ? std::clamp(acc.bmi_sum / static_cast<double>(acc.bmi_bits), 0.0, 1.0) : std::nan("");
    return p;
}

void run_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(n);
    const auto workers = static_cast<std::size_t>(std::clamp<long long>(threads, 1, static_cast<long long>(std::max<std::size_t>(n, 1))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void run_simulate(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt)
{
    std::shared_ptr<const GnnModel> model;
    if (cfg.detector == DetectorKind::gnn) model = load_gnn_model(cfg, true);
    std::vector<SimPoint> points(cfg.snr_points.size());
    run_indexed(points.size(), opt.threads, [&](std::size_t i) {
        points[i] = simulate_point(cfg, cfg.detector, model, cfg.snr_points[i], cfg.seed + i);
    });
    const std::string label = cfg.detector == DetectorKind::gnn ? to_string(cfg.gnn.variant) + (cfg.gnn_joint ? "_jdd" : "")
                                                                 : to_string(cfg.detector);
    out << csv_comment(cfg) << "\n";
    out << "snr_db,ber,bler,bmi,frames,detector,seed,status\n";
    for (const auto& p : points) {
        out << fmt(p.snr_db) << ',' << fmt(p.ber) << ',' << fmt(p.bler) << ',' << fmt(p.bmi) << ',' << p.frames << ','
            << label << ',' << p.seed << ',' << p.status << "\n";
    }
}

TrainConfig effective_train_config(const ExperimentConfig& cfg, const RunOptions& opt)
{
    TrainConfig tc = cfg.train;
    if (opt.paper_budget) {
        const TrainConfig paper = cfg.gnn_joint ? TrainConfig::paper_jdd() : TrainConfig::paper_detection();
        tc.batch_size = paper.batch_size;
        tc.epochs = paper.epochs;
        tc.snr_min_db = paper.snr_min_db;
        tc.snr_max_db = paper.snr_max_db;
    }
    if (opt.steps) tc.epochs = *opt.steps;
    return tc;
}

void run_train(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt)
{
    const TrainConfig tc = effective_train_config(cfg, opt);
    GnnModel model(cfg.gnn, cfg.gnn_init_seed);
    if (!cfg.gnn_checkpoint.empty()) nn::load_checkpoint_file(cfg.gnn_checkpoint, model.params(), nullptr);
    TrainingSession session(model, build_link_graph(cfg.link, cfg.gnn.graph, cfg.gnn_joint), cfg.link, tc);
    if (!cfg.resume.empty()) nn::load_checkpoint_file(cfg.resume, model.params(), &session.adam());

    auto save = [&] {
        if (cfg.output_checkpoint.empty()) return;
        nn::save_checkpoint_file(cfg.output_checkpoint, model.params(), &session.adam());
        std::ofstream side(cfg.output_checkpoint + ".conf");
        side << "# training configuration of " << cfg.output_checkpoint << "\n" << cfg.canonical();
    };

    out << csv_comment(cfg) << "\n";
    out << "step,loss,bmi,snr_db,wall_time\n";
    const auto t0 = std::chrono::steady_clock::now();
    while (session.steps_done() < tc.epochs) {
        const StepMetrics m = cfg.pretrain ? gaussian_prior_pretrain_epoch(session) : train_epoch(session);
        if (m.step % cfg.log_every == 0 || session.steps_done() == tc.epochs) {
            const double wall =
                opt.wall_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
            out << m.step << ',' << fmt(m.loss) << ',' << fmt(m.bmi) << ',' << fmt(m.snr_db) << ',' << fmt(wall) << "\n";
        }
        if (cfg.checkpoint_every > 0 && session.steps_done() % cfg.checkpoint_every == 0) save();
    }
    out.flush();
    save();
}

namespace {

SisoComponent detector_component(const ExperimentConfig& cfg, DetectorKind kind, std::shared_ptr<const GnnModel> model,
                                 double snr_db)
{
    if (kind == DetectorKind::lmmse) throw ConfigError("the lmmse detector takes no priors and has no EXIT curve");
    if (kind == DetectorKind::gnn && !cfg.gnn.prior_embedding) {
        throw ConfigError("a GNN EXIT curve needs gnn.prior_embedding = true");
    }
    auto frame = std::make_shared<FrameInput>();
    auto detect = std::make_shared<DetectFn>(make_detector(cfg, kind, std::move(model)));
    const LinkSetup link = cfg.link;
    SisoComponent c;
    c.label = to_string(kind);
    c.draw = [frame, link, snr_db](Rng& rng) {
        LinkFrame f = draw_frame(link, snr_db, rng);
        *frame = f.rx;
        return f.tx_bits;
    };
    c.infer = [frame, detect](const LlrVector& prior) {
        FrameInput in = *frame;
        in.prior = prior;
        return (*detect)(in);
    };
    return c;
}

SisoComponent decoder_component(const ExperimentConfig& cfg)
{
    const auto code = cfg.link.code;
    const auto enc = cfg.link.encoder;
    const int it = cfg.decoder_iterations;
    SisoComponent c;
    c.label = "spa_decoder";
    c.draw = [enc](Rng& rng) { return enc->encode(random_bits(static_cast<std::size_t>(enc->dimension()), rng)); };
    c.infer = [code, it](const LlrVector& prior) { return spa_decode(*code, prior, it, false).posterior; };
    return c;
}

} // namespace

void run_exit(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& /*opt*/)
{
    std::shared_ptr<const GnnModel> model;
    if (cfg.detector == DetectorKind::gnn) model = load_gnn_model(cfg, true);
    const SisoComponent comp =
        cfg.exit_component == "decoder" ? decoder_component(cfg) : detector_component(cfg, cfg.detector, model, cfg.exit_snr_db);
    ExitOptions eo;
    eo.samples = cfg.exit_samples;
    eo.seed = cfg.seed;
    const ExitCurve curve = exit_characteristic(comp, cfg.exit_snr_db, cfg.exit_grid, cfg.exit_method, eo);
    out << csv_comment(cfg) << "\n";
    out << "ia,ie,snr_db,component,method,samples\n";
    for (std::size_t i = 0; i < curve.ia_grid.size(); ++i) {
        out << fmt(curve.ia_grid[i]) << ',' << fmt(curve.ie_values[i]) << ',' << fmt(curve.snr_db) << ',' << curve.component
            << ',' << to_string(curve.method) << ',' << curve.samples << "\n";
    }
    if (cfg.trajectory_iterations == 0) return;

    const LinkSetup link = cfg.link;
    auto frame = std::make_shared<LinkFrame>();
    const DetectFn detect = make_detector(cfg, cfg.detector, model);
    const double snr = cfg.exit_snr_db;
    TurboLink t;
    t.transmit = [frame, link, snr](Rng& rng) {
        *frame = draw_frame(link, snr, rng);
        return frame->code_bits;
    };
    t.detect = [frame, link, detect](const LlrVector& prior) {
        FrameInput in = frame->rx;
        in.prior = LlrVector(code_to_tx_order(link, prior.values), LlrRole::prior);
        LlrVector total(tx_to_code_order(link, detect(in).values), LlrRole::total);
        for (std::size_t i = 0; i < total.size(); ++i) {
            if (link.code->puncture_mask()[i]) total[i] = prior[i];
        }
        return total;
    };
    const auto code = link.code;
    const int it = cfg.decoder_iterations;
    t.decode = [code, it](const LlrVector& ch) { return spa_decode(*code, ch, it, false).posterior; };
    const Trajectory tr = exit_trajectory(t, cfg.trajectory_iterations, cfg.trajectory_frames, cfg.seed);

    std::ofstream file;
    std::ostream* dst = &out;
    if (!cfg.output_trajectory.empty()) {
        file.open(cfg.output_trajectory);
        if (!file) throw ConfigError("cannot write " + cfg.output_trajectory);
        dst = &file;
        *dst << csv_comment(cfg) << "\n";
    }
    *dst << "iteration,detector_ia,detector_ie,decoder_ie,diverged\n";
    for (const auto& p : tr.points) {
        *dst << p.iteration << ',' << fmt(p.detector_ia) << ',' << fmt(p.detector_ie) << ',' << fmt(p.decoder_ie) << ','
             << (tr.diverged ? 1 : 0) << "\n";
    }
}

void run_latency(const ExperimentConfig& cfg, std::ostream& out, const RunOptions& opt)
{
    struct Row {
        std::string method;
        int iterations = 0;
        long long cycles = 0;
        double ber = std::nan("");
    };
    std::vector<Row> rows;
    for (const auto& m : cfg.latency_methods) {
        if (m == "bcjr") {
            rows.push_back({m, 1, latency_cycles(m, 1, cfg.link.symbols(), cfg.link.cir.memory())});
            continue;
        }
        for (int it : cfg.latency_iterations) rows.push_back({m, it, latency_cycles(m, it, cfg.link.symbols(), cfg.link.cir.memory())});
    }
    if (cfg.latency_measure_ber) {
        std::shared_ptr<const GnnModel> model;
        for (const auto& m : cfg.latency_methods) {
            if (m == "gnn" || m == "fgnn") {
                if (to_string(cfg.gnn.variant) != m) {
                    throw ConfigError("latency method " + m + " needs gnn.variant = " + m + " and its checkpoint");
                }
                model = load_gnn_model(cfg, true);
            }
        }
        run_indexed(rows.size(), opt.threads, [&](std::size_t i) {
            ExperimentConfig c = cfg;
            DetectorKind kind = DetectorKind::bcjr;
            if (rows[i].method == "spa") {
                kind = DetectorKind::spa_ffg;
                c.spa.iterations = rows[i].iterations;
            } else if (rows[i].method != "bcjr") {
                kind = DetectorKind::gnn;
                c.schedule = Schedule::flooding(rows[i].iterations);
            }
            rows[i].ber = simulate_point(c, kind, model, cfg.latency_snr_db, cfg.seed + i).ber;
        });
    }
    out << csv_comment(cfg) << "\n";
    out << "method,iterations,cycles,ber\n";
    for (const auto& r : rows) out << r.method << ',' << r.iterations << ',' << r.cycles << ',' << fmt(r.ber) << "\n";
}

} // namespace gnnrx
