#pragma once

// GNN and FGNN receivers on bipartite detection / joint detection-decoding graphs.
//
// One iteration updates, in order: FN→VN messages, VN states, VN→FN messages,
// FN states. Detection FNs and check FNs have their own FN and edge networks;
// the VN network is shared. Every iteration can be read out.

#include "gnnrx/channel.hpp"
#include "gnnrx/graphs.hpp"
#include "gnnrx/llr.hpp"
#include "gnnrx/nn/autodiff.hpp"
#include "gnnrx/nn/mlp.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gnnrx {

enum class EmbeddingKind { linear, llr, neural_csi, cct };
enum class GnnVariant { gnn, fgnn };

std::string to_string(EmbeddingKind k);
EmbeddingKind parse_embedding(std::string_view s);
std::string to_string(GnnVariant v);
GnnVariant parse_variant(std::string_view s);

/// Flooding (outer, 1): `outer` iterations with every FN class active.
/// Sequential (outer, [a, b]): per outer round, `a` detection-only iterations then `b` check-only.
struct Schedule {
    enum class Kind { flooding, sequential };
    Kind kind = Kind::flooding;
    int outer = 1;
    std::vector<int> inner{1};

    static Schedule flooding(int iterations);
    static Schedule sequential(int outer, int detection_iterations, int check_iterations);
    /// "(10,1)" or "(3,[3,5])"; a bare integer means flooding.
    static Schedule parse(std::string_view text);
    [[nodiscard]] std::string str() const;

    /// Active FN classes per iteration, indexed by FnClass.
    struct Step {
        bool detection = true;
        bool check = true;
    };
    [[nodiscard]] std::vector<Step> expand() const;
    [[nodiscard]] int total_iterations() const;
};

struct GnnConfig {
    GnnVariant variant = GnnVariant::gnn;
    EmbeddingKind embedding = EmbeddingKind::linear;
    DetectionGraphKind graph = DetectionGraphKind::ffg;
    int feature_size = 16;
    int hidden_layers = 2;
    int hidden_units = 64;
    int modulation_order = 2;
    int memory = 0;
    /// Appends σ² to the linear and neural embedding inputs.
    bool embed_noise_variance = true;
    /// Adds check-class networks (joint detection/decoding graphs).
    bool check_nodes = false;
    /// Adds the a-priori LLR embedding s_V = W_V·ℓ_A.
    bool prior_embedding = false;
    /// Block length; required by the CCT embedding, whose filter has a fixed shape.
    int num_symbols = 0;
    long long likelihood_budget = 1'000'000;

    [[nodiscard]] int bits_per_symbol() const;
    /// N_p of the detection edges: L+1 (FFG) or max(1, 2L) (UFG).
    [[nodiscard]] int detection_edge_types() const;
};

/// All trainable state plus the parameter indices of each component.
class GnnModel {
public:
    GnnModel(const GnnConfig& config, std::uint64_t seed);

    [[nodiscard]] const GnnConfig& config() const { return config_; }
    [[nodiscard]] nn::ParameterSet& params() { return params_; }
    [[nodiscard]] const nn::ParameterSet& params() const { return params_; }

    struct ClassNets {
        nn::MlpHandle fn;       // θ_F (gnn only)
        nn::MlpHandle to_vn;    // θ_{F→V}
        nn::MlpHandle to_fn;    // θ_{V→F}
        nn::MlpHandle edge;     // θ_E (fgnn only)
        std::optional<std::size_t> fn_attr;    // 1×d, detection gnn only
        std::optional<std::size_t> to_vn_attr; // N_p×d, detection only
        std::optional<std::size_t> to_fn_attr; // N_p×d, detection only
        bool present = false;
    };

    nn::MlpHandle vn;                 // θ_V (gnn only)
    std::optional<std::size_t> vn_attr; // 3×d: payload, virtual, punctured (gnn only)
    std::array<ClassNets, 2> classes; // indexed by FnClass
    std::optional<std::size_t> embed_matrix;   // linear / llr / cct projection
    nn::MlpHandle embed_mlp;                   // neural_csi
    std::optional<std::size_t> cct_filter;     // H̃
    std::optional<std::size_t> prior_matrix;   // W_V, d×log2(M)
    std::size_t readout = 0;                   // d×log2(M)

    /// Band mask of H̃ (ones where the filter is trainable).
    [[nodiscard]] const nn::Matrix& cct_mask() const { return cct_mask_; }

private:
    GnnConfig config_;
    nn::ParameterSet params_;
    nn::Matrix cct_mask_;
};

/// Receiver-side inputs of one frame.
struct FrameInput {
    CVector y;
    Cir cir; // CSI available to the receiver
    double noise_variance = 1.0;
    /// One LLR per bit of each readout VN, in readout order.
    std::optional<LlrVector> prior;
};

struct ForwardPass {
    /// Per iteration: (frames · readout VNs) × log2(M) LLRs, frame-major.
    std::vector<nn::Tape::Var> llrs;
};

/// Differentiable forward pass over a batch replicated on `graph`.
/// Throws NumericalDivergence when a state becomes non-finite.
ForwardPass gnn_forward(nn::Tape& tape, const GnnModel& model, const BipartiteGraph& graph,
                        std::span<const FrameInput> batch, const Schedule& schedule);

/// Detection: flooding for `iterations` iterations, LLRs (role total) after every iteration.
std::vector<LlrVector> gnn_detect(const GnnModel& model, const BipartiteGraph& graph, const FrameInput& frame,
                                  int iterations);

/// Joint detection/decoding under an explicit schedule; LLRs of all code bits after every iteration.
std::vector<LlrVector> jdd_infer(const GnnModel& model, const BipartiteGraph& joint_graph, const FrameInput& frame,
                                 const Schedule& schedule);

/// M^(L+1) log-likelihoods −|y − Σ h_l x_{i−l}|²/σ² of one observation, max-normalised and
/// clipped below at −LLR_MAX. Entry index: symbol of x_{i−l} in base-M digit l.
/// `valid[l]` false marks a virtual (zero) symbol, whose digit is ignored.
std::vector<double> ffg_log_likelihoods(Complex y, const Cir& cir, double noise_variance, const Constellation& c,
                                        const std::vector<bool>& valid);

struct CctResult {
    CMatrix filter;  // R
    CVector output;  // ỹ = R y
    bool regularized = false;
};

/// R = H̃ (HᴴH + I/σ²)⁻¹ Hᴴ and ỹ = R y. H̃ is (N_x+L) × (N_x+2L), so R is square.
/// A singular or non-finite system gets a small diagonal floor and sets `regularized`.
CctResult cct_filter(const CMatrix& channel_matrix, double noise_variance, const nn::Matrix& target,
                     const CVector& y);

/// Band of ones of width L+1 shaped like a channel matrix, (N_x+L) × (N_x+2L).
nn::Matrix cct_band(int num_symbols, int memory);

/// (HᴴH + I/σ²)⁻¹ Hᴴ y, the part of the CCT that does not depend on H̃.
CVector cct_prefilter(const CMatrix& channel_matrix, double noise_variance, const CVector& y, bool* regularized);

} // namespace gnnrx
