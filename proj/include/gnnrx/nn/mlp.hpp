#pragma once

#include "gnnrx/nn/autodiff.hpp"

#include <random>
#include <string_view>
#include <vector>

namespace gnnrx::nn {

using Rng = std::mt19937_64;

/// Glorot-normal matrix of shape (fan_out, fan_in), entries ~ N(0, 2/(fan_in+fan_out)).
Matrix glorot_init(int fan_in, int fan_out, Rng& rng);

/// Standard-normal matrix, used for attribute vectors.
Matrix normal_init(Index rows, Index cols, Rng& rng);

/// Dense network with ReLU hidden layers and an affine output layer.
struct Mlp {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;           // weights[k]: (layer_dims[k+1], layer_dims[k])
    std::vector<Eigen::VectorXd> biases;   // biases[k]: layer_dims[k+1]

    [[nodiscard]] int input_dim() const { return layer_dims.front(); }
    [[nodiscard]] int output_dim() const { return layer_dims.back(); }
};

/// Glorot weights, zero biases.
Mlp make_mlp(std::vector<int> layer_dims, Rng& rng);

/// Plain (tape-free) forward pass; throws ShapeError on a length mismatch.
Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& input);

/// Parameter indices of an Mlp stored inside a ParameterSet.
struct MlpHandle {
    std::vector<int> layer_dims;
    std::vector<std::size_t> weight_ids;
    std::vector<std::size_t> bias_ids;
};

/// Registers the layers as `<prefix>.w<k>` / `<prefix>.b<k>`.
MlpHandle add_mlp(ParameterSet& params, std::string_view prefix, const Mlp& mlp);

/// Copies the current values back out of the parameter set.
Mlp mlp_view(const ParameterSet& params, const MlpHandle& handle);

/// Row-batched forward on a tape: x is (batch, input_dim).
Tape::Var mlp_apply(Tape& tape, const MlpHandle& handle, Tape::Var x);

} // namespace gnnrx::nn
