#pragma once

#include "gnnrx/nn/autodiff.hpp"

#include <cstdint>

namespace gnnrx::nn {

struct AdamState {
    std::uint64_t step_count = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Zero moments shaped like `params`.
    static AdamState for_parameters(const ParameterSet& params, double learning_rate);
};

/// One bias-corrected Adam update. A non-finite gradient rejects the step
/// (parameters and state untouched) and throws NumericalDivergence.
void adam_step(AdamState& state, ParameterSet& params, const GradientRecord& grads);

} // namespace gnnrx::nn
