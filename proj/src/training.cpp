#include "gnnrx/training.hpp"

#include "gnnrx/errors.hpp"
#include "gnnrx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gnnrx {

void TrainConfig::validate() const
{
    if (batch_size < 1 || epochs < 0) throw std::invalid_argument("train: batch size and epochs must be positive");
    if (!(snr_min_db <= snr_max_db)) throw std::invalid_argument("train: snr_min must not exceed snr_max");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
    if (!(ia_min >= 0.0 && ia_min <= ia_max && ia_max <= 1.0)) throw std::invalid_argument("train: I_A range must lie in [0, 1]");
}

TrainConfig TrainConfig::paper_detection()
{
    TrainConfig c;
    c.batch_size = 256;
    c.epochs = 50000;
    return c;
}

TrainConfig TrainConfig::paper_jdd()
{
    TrainConfig c;
    c.batch_size = 256;
    c.epochs = 160000;
    c.snr_max_db = 13.0;
    return c;
}

double bce_loss(std::span<const std::uint8_t> bits, std::span<const double> q)
{
    if (bits.size() != q.size() || bits.empty()) throw ShapeError("bce_loss: bits and probabilities differ in length");
    double acc = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const double p = std::clamp(q[i], 1e-12, 1.0 - 1e-12);
        acc -= bits[i] ? std::log2(p) : std::log2(1.0 - p);
    }
    return acc / static_cast<double>(bits.size());
}

double multi_loss(std::span<const double> per_iteration)
{
    if (per_iteration.empty()) throw std::invalid_argument("multi_loss: no iterations");
    double s = 0.0;
    for (double v : per_iteration) s += v;
    return s / static_cast<double>(per_iteration.size());
}

TrainingSession::TrainingSession(GnnModel& model, BipartiteGraph graph, LinkSetup link, TrainConfig config)
    : model_(&model), graph_(std::move(graph)), link_(std::move(link)), config_(std::move(config)),
      adam_(nn::AdamState::for_parameters(model.params(), config_.learning_rate))
{
    config_.validate();
    if (model.config().bits_per_symbol() != link_.bits_per_symbol()) throw ShapeError("model and link modulation differ");
    if (model.config().memory != link_.cir.memory()) throw ShapeError("model and link CIR memory differ");
}

std::uint64_t TrainingSession::batch_seed(long long step) const
{
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

StepMetrics TrainingSession::evaluate(long long step, bool with_priors, nn::GradientRecord* grads)
{
    StepMetrics m;
    m.step = step;
    m.batch_seed = batch_seed(step);
    Rng rng(m.batch_seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    m.snr_db = config_.snr_min_db + (config_.snr_max_db - config_.snr_min_db) * u(rng);
    if (with_priors) m.ia = config_.fixed_ia ? *config_.fixed_ia : config_.ia_min + (config_.ia_max - config_.ia_min) * u(rng);

    const bool joint = graph_.count_fn(FnClass::check) > 0;
    const int k = model_->config().bits_per_symbol();
    const auto rows_per = static_cast<nn::Index>(graph_.readout_vns.size());
    const auto B = static_cast<nn::Index>(config_.batch_size);
    std::vector<FrameInput> batch;
    batch.reserve(static_cast<std::size_t>(B));
    nn::Matrix target(B * rows_per, k);
    Bits flat;
    for (nn::Index b = 0; b < B; ++b) {
        LinkFrame f = draw_frame(link_, m.snr_db, rng);
        const Bits& bits = joint ? f.code_bits : f.tx_bits;
        if (static_cast<nn::Index>(bits.size()) != rows_per * k) throw ShapeError("training target length differs from readout");
        if (with_priors) f.rx.prior = sample_prior_llrs(bits, m.ia, rng);
        for (nn::Index j = 0; j < rows_per * k; ++j) target(b * rows_per + j / k, j % k) = bits[static_cast<std::size_t>(j)];
        flat.insert(flat.end(), bits.begin(), bits.end());
        batch.push_back(std::move(f.rx));
    }

    try {
        nn::Tape tape(model_->params());
        const auto pass = gnn_forward(tape, *model_, graph_, batch, config_.schedule);
        const auto tgt = std::make_shared<const nn::Matrix>(std::move(target));
        std::vector<nn::Tape::Var> losses;
        if (config_.loss == LossKind::multi) {
            for (auto v : pass.llrs) losses.push_back(tape.bce_llr(v, tgt));
        } else {
            losses.push_back(tape.bce_llr(pass.llrs.back(), tgt));
        }
        const auto loss = tape.average(losses);
        m.loss = tape.value(loss)(0, 0);
        const nn::Matrix& last = tape.value(pass.llrs.back());
        std::vector<double> ll(static_cast<std::size_t>(last.size()));
        for (nn::Index r = 0; r < last.rows(); ++r) {
            for (nn::Index q = 0; q < k; ++q) ll[static_cast<std::size_t>(r * k + q)] = last(r, q);
        }
        m.bmi = bmi_estimate(flat, ll);
        if (grads) *grads = tape.backward(loss);
    } catch (const NumericalDivergence& e) {
        throw NumericalDivergence(e.what(), m.batch_seed);
    }
    if (!std::isfinite(m.loss)) throw NumericalDivergence("non-finite training loss", m.batch_seed);
    return m;
}

namespace {

StepMetrics run_epoch(TrainingSession& s, bool priors)
{
    nn::GradientRecord g;
    const StepMetrics m = s.evaluate(s.steps_done(), priors, &g);
    try {
        nn::adam_step(s.adam(), s.model().params(), g);
    } catch (const NumericalDivergence& e) {
        throw NumericalDivergence(e.what(), m.batch_seed);
    }
    return m;
}

} // namespace

StepMetrics train_epoch(TrainingSession& session) { return run_epoch(session, false); }

StepMetrics gaussian_prior_pretrain_epoch(TrainingSession& session)
{
    if (!session.model().config().prior_embedding) {
        throw UnsupportedConfiguration("Gaussian-prior pretraining needs a model with prior embedding");
    }
    return run_epoch(session, true);
}

void train(TrainingSession& session, long long steps, bool gaussian_priors, const StepCallback& on_step)
{
    for (long long i = 0; i < steps; ++i) {
        const StepMetrics m = gaussian_priors ? gaussian_prior_pretrain_epoch(session) : train_epoch(session);
        if (on_step) on_step(m);
    }
}

void two_stage_finetune(TrainingSession& session, const Schedule& stage1, long long steps1, const Schedule& stage2,
                        long long steps2, const StepCallback& on_step)
{
    session.config().schedule = stage1;
    train(session, steps1, false, on_step);
    session.config().schedule = stage2;
    train(session, steps2, false, on_step);
}

} // namespace gnnrx
