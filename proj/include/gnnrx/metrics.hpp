#pragma once

// Error counting, bit-wise mutual information, EXIT analysis and the latency model.

#include "gnnrx/channel.hpp"
#include "gnnrx/llr.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gnnrx {

/// Fraction of differing positions. Throws std::invalid_argument on empty or unequal inputs.
double ber(std::span<const std::uint8_t> reference, std::span<const std::uint8_t> decisions);
/// Fraction of frames with at least one bit error.
double bler(const std::vector<Bits>& reference, const std::vector<Bits>& decisions);

/// Bit 1 where the LLR is negative.
Bits hard_decisions(std::span<const double> llrs);

/// 1 − mean log2(1 + exp(−(1−2c)ℓ)), not clipped.
double bmi_estimate_raw(std::span<const std::uint8_t> bits, std::span<const double> llrs);
/// The estimator clipped to [0, 1].
double bmi_estimate(std::span<const std::uint8_t> bits, std::span<const double> llrs);

/// Mean of consistent Gaussian LLRs carrying mutual information I_A. Throws for I_A ∉ [0, 1).
double mu_of_ia(double ia);

/// ℓ ~ N((1−2c)μ(I_A), 2μ(I_A)). I_A ≥ 1 gives ±LLR_MAX and sets `saturated`.
LlrVector sample_prior_llrs(std::span<const std::uint8_t> bits, double ia, Rng& rng, bool* saturated = nullptr);

enum class ExtrinsicMethod { subtract, omit_index };
std::string to_string(ExtrinsicMethod m);
ExtrinsicMethod parse_extrinsic_method(std::string_view s);

/// Soft-in soft-out component for EXIT measurements. `draw` creates a fresh frame and returns its
/// reference bits; `infer` maps prior LLRs of those bits to total LLRs on the last drawn frame.
struct SisoComponent {
    std::string label;
    std::function<Bits(Rng&)> draw;
    std::function<LlrVector(const LlrVector& prior)> infer;
};

struct ExitCurve {
    std::vector<double> ia_grid;
    std::vector<double> ie_values; // clipped to [0, 1]
    std::vector<double> ie_raw;
    double snr_db = 0.0;
    std::string component;
    ExtrinsicMethod method = ExtrinsicMethod::subtract;
    long long samples = 0; // bits per grid point
};

struct ExitOptions {
    long long samples = 200000;
    std::uint64_t seed = 1;
    /// omit_index runs the component once per bit; frames longer than this are rejected.
    int omit_index_max_bits = 256;
};

/// Throws BudgetExceeded for omit_index on long frames, std::invalid_argument on an unsorted grid.
ExitCurve exit_characteristic(const SisoComponent& component, double snr_db, const std::vector<double>& ia_grid,
                              ExtrinsicMethod method, const ExitOptions& options);

/// 21 points 0, 0.05, …, 0.95, 0.99.
std::vector<double> default_ia_grid();

/// One frame of a turbo loop: both components see the same code bits (in code order).
struct TurboLink {
    std::function<Bits(Rng&)> transmit;
    std::function<LlrVector(const LlrVector& prior)> detect; // total LLRs
    std::function<LlrVector(const LlrVector& channel)> decode; // posterior LLRs
};

struct TrajectoryPoint {
    int iteration = 0;
    double detector_ia = 0.0;
    double detector_ie = 0.0;
    double decoder_ie = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    /// Set when the detector output information drops by more than 0.05 between iterations.
    bool diverged = false;
};

/// Measured extrinsic information through real turbo iterations (subtract method), averaged over frames.
Trajectory exit_trajectory(const TurboLink& link, int max_turbo_iterations, int frames, std::uint64_t seed);

/// ∫₀¹ T(I_A) dI_A by the trapezoid rule; the curve is extended flat to 0 and 1.
double tdd_rate(const ExitCurve& curve);

/// Hardware cycles: gnn 12/iteration, fgnn 10, spa 2, bcjr N_x+L+2 (iterations ignored).
/// Throws std::invalid_argument for other kinds.
long long latency_cycles(std::string_view kind, int iterations, int num_symbols, int memory);

} // namespace gnnrx
