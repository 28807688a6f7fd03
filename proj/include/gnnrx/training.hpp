#pragma once

// Losses and training loops: SDD/JDD training, Gaussian-prior pretraining for TDD and
// two-stage schedule finetuning. One epoch is one freshly simulated batch.

#include "gnnrx/gnn.hpp"
#include "gnnrx/link.hpp"
#include "gnnrx/nn/adam.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gnnrx {

enum class LossKind { bce, multi };

struct TrainConfig {
    int batch_size = 128;
    long long epochs = 20000;
    double snr_min_db = 10.0;
    double snr_max_db = 14.0;
    double learning_rate = 1e-4;
    Schedule schedule = Schedule::flooding(10);
    LossKind loss = LossKind::multi;
    std::uint64_t seed = 1;
    /// I_A range for Gaussian-prior pretraining; `fixed_ia` overrides the draw.
    double ia_min = 0.0;
    double ia_max = 1.0;
    std::optional<double> fixed_ia;

    /// Throws std::invalid_argument.
    void validate() const;
    /// Table II detection values: batch 256, 5·10^4 epochs, SNR 10–14 dB.
    static TrainConfig paper_detection();
    /// Table II JDD values: batch 256, 1.6·10^5 epochs, SNR 10–13 dB, flooding (10,1).
    static TrainConfig paper_jdd();
};

/// Mean of −[c log2 q + (1−c) log2(1−q)] with q = P(c = 1) clamped to [1e-12, 1 − 1e-12].
double bce_loss(std::span<const std::uint8_t> bits, std::span<const double> q);
/// Arithmetic mean. Throws std::invalid_argument on an empty list.
double multi_loss(std::span<const double> per_iteration);

struct StepMetrics {
    long long step = 0;
    double loss = 0.0;
    double bmi = 0.0; // last iteration, this batch
    double snr_db = 0.0;
    double ia = 0.0;
    std::uint64_t batch_seed = 0;
};

/// Model, graph, simulated link and optimiser state of one training run.
class TrainingSession {
public:
    TrainingSession(GnnModel& model, BipartiteGraph graph, LinkSetup link, TrainConfig config);

    [[nodiscard]] GnnModel& model() { return *model_; }
    [[nodiscard]] const BipartiteGraph& graph() const { return graph_; }
    [[nodiscard]] const LinkSetup& link() const { return link_; }
    [[nodiscard]] TrainConfig& config() { return config_; }
    [[nodiscard]] nn::AdamState& adam() { return adam_; }
    [[nodiscard]] long long steps_done() const { return static_cast<long long>(adam_.step_count); }

    /// Seed of the batch drawn at `step`.
    [[nodiscard]] std::uint64_t batch_seed(long long step) const;

    /// Simulates one batch at `step`, runs the forward pass and returns the loss; gradients when `grads` is set.
    StepMetrics evaluate(long long step, bool with_priors, nn::GradientRecord* grads);

private:
    GnnModel* model_;
    BipartiteGraph graph_;
    LinkSetup link_;
    TrainConfig config_;
    nn::AdamState adam_;
};

/// One SDD/JDD epoch: fresh batch, forward, loss, one Adam step.
/// NumericalDivergence carries the batch seed.
StepMetrics train_epoch(TrainingSession& session);

/// One epoch with Gaussian priors on the bits: I_A ~ U(ia_min, ia_max), loss on the total output.
StepMetrics gaussian_prior_pretrain_epoch(TrainingSession& session);

using StepCallback = std::function<void(const StepMetrics&)>;

/// Runs `steps` epochs with train_epoch (or the pretraining epoch), invoking `on_step` after each.
void train(TrainingSession& session, long long steps, bool gaussian_priors, const StepCallback& on_step = {});

/// Trains `steps1` epochs on `stage1`, then `steps2` on `stage2` with the same parameters, optimiser and seed stream.
void two_stage_finetune(TrainingSession& session, const Schedule& stage1, long long steps1, const Schedule& stage2,
                        long long steps2, const StepCallback& on_step = {});

} // namespace gnnrx
