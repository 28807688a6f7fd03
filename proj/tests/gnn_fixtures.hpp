#pragma once

// Micro GNN instances, frames and the batched multi-iteration loss shared by the
// GNN unit tests and the acceptance run.

#include "gnnrx/gnn.hpp"
#include "oracles.hpp"

#include <vector>

namespace fixture {

using namespace gnnrx;
using nn::GradientRecord;
using nn::Matrix;
using nn::ParameterSet;

inline GnnConfig micro(GnnVariant v, EmbeddingKind e, DetectionGraphKind g, int memory)
{
    GnnConfig c;
    c.variant = v;
    c.embedding = e;
    c.graph = g;
    c.memory = memory;
    c.feature_size = 4;
    c.hidden_layers = 1;
    c.hidden_units = 16;
    c.num_symbols = 4;
    return c;
}

struct Frame {
    FrameInput in;
    Bits bits;
};

inline Frame make_frame(const Cir& h, int nx, int m, double sigma2, Rng& rng)
{
    const Constellation c(m);
    Frame f;
    f.bits = random_bits(static_cast<std::size_t>(nx * c.bits_per_symbol()), rng);
    f.in.y = apply_isi(modulate(f.bits, c), h, sigma2, rng);
    f.in.cir = h;
    f.in.noise_variance = sigma2;
    return f;
}

inline BipartiteGraph graph_for(const GnnConfig& c, int nx)
{
    return c.graph == DetectionGraphKind::ffg ? build_ffg(nx, c.memory) : build_ufg(nx, c.memory);
}

// Multi-iteration BCE on a small batch.
inline double batch_loss(const GnnModel& model, const BipartiteGraph& g, const std::vector<Frame>& frames,
                  const Schedule& sched, GradientRecord* grad)
{
    nn::Tape tape(model.params());
    std::vector<FrameInput> in;
    Matrix bits(static_cast<nn::Index>(frames.size() * g.readout_vns.size()), model.config().bits_per_symbol());
    for (std::size_t b = 0; b < frames.size(); ++b) {
        in.push_back(frames[b].in);
        for (nn::Index j = 0; j < static_cast<nn::Index>(frames[b].bits.size()); ++j) {
            const auto row = static_cast<nn::Index>(b * g.readout_vns.size()) + j / bits.cols();
            bits(row, j % bits.cols()) = frames[b].bits[static_cast<std::size_t>(j)];
        }
    }
    const auto pass = gnn_forward(tape, model, g, in, sched);
    const auto target = std::make_shared<const Matrix>(bits);
    std::vector<nn::Tape::Var> losses;
    for (auto v : pass.llrs) losses.push_back(tape.bce_llr(v, target));
    const auto loss = tape.average(losses);
    if (grad) *grad = tape.backward(loss);
    return tape.value(loss)(0, 0);
}

inline std::vector<Frame> frames_for(const GnnConfig& c, int nx, std::uint64_t seed, int count = 2)
{
    Rng rng(seed);
    const Cir h = c.memory == 0 ? Cir{{1.0}} : random_cir(c.memory, rng);
    std::vector<Frame> out;
    for (int b = 0; b < count; ++b) out.push_back(make_frame(h, nx, c.modulation_order, 0.3, rng));
    return out;
}

// Zero biases on zero-initialised states put ReLU inputs exactly on the kink.
inline void jitter_biases(GnnModel& model)
{
    Rng jitter(77);
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        const std::string& name = model.params().name(p);
        if (name.find(".b") != std::string::npos) {
            model.params().value(p) += 0.1 * nn::normal_init(model.params().value(p).rows(), model.params().value(p).cols(), jitter);
        }
    }
}

// A step of 1e-4 crosses ReLU kinks of the wider nets; 1e-6 keeps rounding error near 1e-10.
inline oracle::FdReport gradient_report(GnnModel& model, const BipartiteGraph& g, const std::vector<Frame>& frames,
                                        const Schedule& sched)
{
    jitter_biases(model);
    return oracle::finite_difference_check(model.params(), [&](nn::ParameterSet&, nn::GradientRecord* gr) {
        return batch_loss(model, g, frames, sched, gr);
    }, 1e-6);
}

} // namespace fixture
