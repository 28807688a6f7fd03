#pragma once

// Reference detectors: log-domain BCJR, damped SPA on FFG/UFG, block LMMSE
// with memoryless demapping.

#include "gnnrx/channel.hpp"
#include "gnnrx/graphs.hpp"
#include "gnnrx/llr.hpp"

#include <optional>
#include <vector>

namespace gnnrx {

/// Trellis of an ISI channel: state = indices of the last L symbols, most recent in the lowest digit.
struct Trellis {
    int order = 2;
    int memory = 0;
    long long num_states = 1;

    struct Transition {
        long long prev_state;
        int input;
        long long next_state;
        Complex output; // Σ h_l x_{i−l} for an interior stage
    };
    std::vector<Transition> transitions; // grouped by prev_state, M per state

    /// Symbol index of x_{i−1−k} encoded in `state`.
    [[nodiscard]] int digit(long long state, int k) const;
};

/// Default limit on M^(L+1) state transitions per trellis stage.
inline constexpr long long kDefaultTransitionBudget = 1'000'000;

Trellis build_trellis(const Cir& cir, const Constellation& c, long long transition_budget = kDefaultTransitionBudget);

/// Exact bitwise APP LLRs (role total), log2(M) per payload symbol.
/// `prior_bit_llrs`, when given, holds one LLR per transmitted bit.
LlrVector bcjr_detect(const CVector& y, const Cir& cir, double noise_variance, const Constellation& c,
                      const std::optional<LlrVector>& prior_bit_llrs = std::nullopt,
                      long long transition_budget = kDefaultTransitionBudget);

/// Symbol log-priors from bit LLRs: log P(x = s) up to a per-symbol constant.
std::vector<std::vector<double>> symbol_log_priors(const LlrVector& bit_llrs, const Constellation& c,
                                                   std::size_t num_symbols);

/// Bit LLRs from per-symbol log-probabilities (unnormalised).
void symbol_to_bit_llrs(std::span<const double> log_probs, const Constellation& c, std::vector<double>& out);

struct SpaOptions {
    double damping = 1.0;
    int iterations = 10;
    /// Divergence is flagged when a bit LLR with magnitude ≥ threshold flips sign and keeps
    /// magnitude ≥ threshold from one iteration to the next, or when a message stops being finite.
    double divergence_threshold = kLlrMax / 2;
    long long likelihood_budget = kDefaultTransitionBudget;
};

struct SpaResult {
    std::vector<LlrVector> per_iteration;
    bool diverged = false;
    int divergence_iteration = 0; // 1-based, 0 when not diverged
};

/// SPA on a Forney factor graph built by build_ffg.
SpaResult spa_detect_ffg(const BipartiteGraph& graph, const CVector& y, const Cir& cir, double noise_variance,
                         const Constellation& c, const SpaOptions& options,
                         const std::optional<LlrVector>& prior_bit_llrs = std::nullopt);

/// SPA on an Ungerboeck factor graph built by build_ufg; inputs are G and χ from ufg_statistics.
SpaResult spa_detect_ufg(const BipartiteGraph& graph, const UfgStatistics& stats, int memory, double noise_variance,
                         const Constellation& c, const SpaOptions& options,
                         const std::optional<LlrVector>& prior_bit_llrs = std::nullopt);

struct LmmseResult {
    LlrVector llrs;
    CVector estimates;            // x̂ (biased LMMSE output) at payload positions
    Eigen::VectorXd gains;        // μ_i = [W H]_{ii}
    bool regularized = false;     // σ² = 0 with a rank-deficient H needed a floor
};

/// x̂ = (H_pᴴH_p + σ²I)⁻¹ H_pᴴ y over the payload columns H_p of H, then exact max* demapping
/// of z_i = x̂_i/μ_i with noise variance (1−μ_i)/μ_i.
LmmseResult lmmse_detect(const CVector& y, const CMatrix& channel_matrix, int memory, double noise_variance,
                         const Constellation& c);

/// Memoryless demapper: LLRs of z = x + n, n ~ CN(0, v).
void demap_memoryless(Complex z, double noise_variance, const Constellation& c, std::vector<double>& out);

} // namespace gnnrx
