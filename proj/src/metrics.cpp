#include "gnnrx/metrics.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gnnrx {

double ber(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> decisions)
{
    if (reference.empty() || reference.size() != decisions.size()) {
        throw std::invalid_argument("ber: inputs must be non-empty and of equal length");
    }
    std::size_t errors = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) errors += (reference[i] != 0) != (decisions[i] != 0);
    return static_cast<double>(errors) / static_cast<double>(reference.size());
}

double bler(const std::vector<Bits>& reference, const std::vector<Bits>& decisions)
{
    if (reference.empty() || reference.size() != decisions.size()) {
        throw std::invalid_argument("bler: frame lists must be non-empty and of equal length");
    }
    std::size_t bad = 0;
    for (std::size_t f = 0; f < reference.size(); ++f) bad += ber(reference[f], decisions[f]) > 0.0;
    return static_cast<double>(bad) / static_cast<double>(reference.size());
}

Bits hard_decisions(std::span<const double> llrs)
{
    Bits out(llrs.size());
    for (std::size_t i = 0; i < llrs.size(); ++i) out[i] = llrs[i] < 0.0;
    return out;
}

double bmi_estimate_raw(std::span<const std::uint8_t> bits, std::span<const double> llrs)
{
    if (bits.size() != llrs.size() || bits.empty()) throw ShapeError("bmi_estimate: bits and LLRs differ in length");
    double acc = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const double x = -(bits[i] ? -llrs[i] : llrs[i]);
        acc += (std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)))) / std::numbers::ln2; // softplus in bits
    }
    return 1.0 - acc / static_cast<double>(bits.size());
}

double bmi_estimate(std::span<const std::uint8_t> bits, std::span<const double> llrs)
{
    return std::clamp(bmi_estimate_raw(bits, llrs), 0.0, 1.0);
}

double mu_of_ia(double ia)
{
    if (!(ia >= 0.0 && ia < 1.0)) throw std::invalid_argument("mu_of_ia: I_A must lie in [0, 1)");
    constexpr double h1 = 0.3073;
    constexpr double h2 = 0.8935;
    constexpr double h3 = 1.1064;
    if (ia == 0.0) return 0.0;
    return 0.5 * std::pow(-std::log2(1.0 - std::pow(ia, 1.0 / h3)) / h1, 1.0 / h2);
}

LlrVector sample_prior_llrs(std::span<const std::uint8_t> bits, double ia, Rng& rng, bool* saturated)
{
    LlrVector out;
    out.role = LlrRole::prior;
    out.values.resize(bits.size());
    if (saturated) *saturated = ia >= 1.0;
    if (ia >= 1.0) {
        for (std::size_t i = 0; i < bits.size(); ++i) out.values[i] = bits[i] ? -kLlrMax : kLlrMax;
        return out;
    }
    const double mu = mu_of_ia(ia);
    if (mu == 0.0) return out;
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 * mu));
    for (std::size_t i = 0; i < bits.size(); ++i) out.values[i] = saturate((bits[i] ? -mu : mu) + n(rng));
    return out;
}

std::string to_string(ExtrinsicMethod m) { return m == ExtrinsicMethod::subtract ? "subtract" : "omit_index"; }

ExtrinsicMethod parse_extrinsic_method(std::string_view s)
{
    if (s == "subtract") return ExtrinsicMethod::subtract;
    if (s == "omit_index") return ExtrinsicMethod::omit_index;
    throw std::invalid_argument("unknown extrinsic method '" + std::string(s) + "'");
}

std::vector<double> default_ia_grid()
{
    std::vector<double> g;
    for (int k = 0; k < 20; ++k) g.push_back(0.05 * k);
    g.push_back(0.99);
    return g;
}

ExitCurve exit_characteristic(const SisoComponent& component, double snr_db, const std::vector<double>& ia_grid,
                              ExtrinsicMethod method, const ExitOptions& options)
{
    if (ia_grid.empty() || !std::is_sorted(ia_grid.begin(), ia_grid.end())) {
        throw std::invalid_argument("exit_characteristic: I_A grid must be sorted and non-empty");
    }
    if (options.samples < 1) throw std::invalid_argument("exit_characteristic: sample count must be positive");
    ExitCurve curve;
    curve.ia_grid = ia_grid;
    curve.snr_db = snr_db;
    curve.component = component.label;
    curve.method = method;
    Rng rng(options.seed);
    for (double ia : ia_grid) {
        Bits all_bits;
        std::vector<double> all_ext;
        while (static_cast<long long>(all_bits.size()) < options.samples) {
            const Bits c = component.draw(rng);
            const LlrVector prior = sample_prior_llrs(c, ia, rng);
            if (method == ExtrinsicMethod::subtract) {
                const LlrVector total = component.infer(prior);
                if (total.size() != c.size()) throw ShapeError("exit_characteristic: component output length mismatch");
                for (std::size_t i = 0; i < c.size(); ++i) all_ext.push_back(saturate(total[i] - prior[i]));
            } else {
                if (static_cast<int>(c.size()) > options.omit_index_max_bits) {
                    throw BudgetExceeded("omit_index EXIT needs one inference per bit; frame of " +
                                         std::to_string(c.size()) + " bits exceeds the limit");
                }
                for (std::size_t i = 0; i < c.size(); ++i) {
                    LlrVector p = prior;
                    p.values[i] = 0.0;
                    all_ext.push_back(component.infer(p)[i]);
                }
            }
            all_bits.insert(all_bits.end(), c.begin(), c.end());
        }
        const double raw = bmi_estimate_raw(all_bits, all_ext);
        curve.ie_raw.push_back(raw);
        curve.ie_values.push_back(std::clamp(raw, 0.0, 1.0));
        curve.samples = static_cast<long long>(all_bits.size());
    }
    return curve;
}

Trajectory exit_trajectory(const TurboLink& link, int max_turbo_iterations, int frames, std::uint64_t seed)
{
    if (max_turbo_iterations < 1 || frames < 1) throw std::invalid_argument("exit_trajectory: counts must be positive");
    const auto T = static_cast<std::size_t>(max_turbo_iterations);
    std::vector<Bits> bits(T);
    std::vector<std::vector<double>> det_prior(T);
    std::vector<std::vector<double>> det_ext(T);
    std::vector<std::vector<double>> dec_ext(T);
    Rng rng(seed);
    for (int f = 0; f < frames; ++f) {
        const Bits c = link.transmit(rng);
        LlrVector prior(std::vector<double>(c.size(), 0.0), LlrRole::prior);
        for (std::size_t t = 0; t < T; ++t) {
            const LlrVector total = link.detect(prior);
            LlrVector ext(std::vector<double>(c.size()), LlrRole::extrinsic);
            for (std::size_t i = 0; i < c.size(); ++i) ext[i] = saturate(total[i] - prior[i]);
            const LlrVector post = link.decode(ext);
            LlrVector back(std::vector<double>(c.size()), LlrRole::prior);
            for (std::size_t i = 0; i < c.size(); ++i) back[i] = saturate(post[i] - ext[i]);
            bits[t].insert(bits[t].end(), c.begin(), c.end());
            det_prior[t].insert(det_prior[t].end(), prior.values.begin(), prior.values.end());
            det_ext[t].insert(det_ext[t].end(), ext.values.begin(), ext.values.end());
            dec_ext[t].insert(dec_ext[t].end(), back.values.begin(), back.values.end());
            prior = back;
        }
    }
    Trajectory tr;
    for (std::size_t t = 0; t < T; ++t) {
        TrajectoryPoint p;
        p.iteration = static_cast<int>(t);
        p.detector_ia = bmi_estimate(bits[t], det_prior[t]);
        p.detector_ie = bmi_estimate(bits[t], det_ext[t]);
        p.decoder_ie = bmi_estimate(bits[t], dec_ext[t]);
        if (t > 0 && p.detector_ie < tr.points.back().detector_ie - 0.05) tr.diverged = true;
        tr.points.push_back(p);
    }
    return tr;
}

double tdd_rate(const ExitCurve& curve)
{
    const auto& x = curve.ia_grid;
    const auto& y = curve.ie_values;
    if (x.size() < 2 || x.size() != y.size()) throw std::invalid_argument("tdd_rate: need at least two grid points");
    double area = x.front() * y.front() + (1.0 - x.back()) * y.back();
    for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return area;
}

long long latency_cycles(std::string_view kind, int iterations, int num_symbols, int memory)
{
    if (iterations < 0 || num_symbols < 0 || memory < 0) throw std::invalid_argument("latency_cycles: negative size");
    if (kind == "gnn") return 12LL * iterations;
    if (kind == "fgnn") return 10LL * iterations;
    if (kind == "spa") return 2LL * iterations;
    if (kind == "bcjr") return static_cast<long long>(num_symbols) + memory + 2;
    throw std::invalid_argument("latency_cycles: unknown kind '" + std::string(kind) + "'");
}

} // namespace gnnrx
