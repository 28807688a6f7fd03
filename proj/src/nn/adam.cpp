#include "gnnrx/nn/adam.hpp"

#include "gnnrx/errors.hpp"

#include <cmath>

namespace gnnrx::nn {

AdamState AdamState::for_parameters(const ParameterSet& params, double learning_rate)
{
    AdamState s;
    s.learning_rate = learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.first_moment.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
        s.second_moment.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    }
    return s;
}

void adam_step(AdamState& state, ParameterSet& params, const GradientRecord& grads)
{
    if (grads.gradients.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = grads.gradients[i];
        if (g.rows() != params.value(i).rows() || g.cols() != params.value(i).cols()) {
            throw ShapeError("adam_step: gradient shape mismatch for " + params.name(i));
        }
        if (!g.allFinite()) {
            throw NumericalDivergence("adam_step: non-finite gradient for " + params.name(i));
        }
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = grads.gradients[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
        params.value(i).array() -=
            state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    }
}

} // namespace gnnrx::nn
