#include "gnnrx/nn/mlp.hpp"

#include "gnnrx/errors.hpp"

#include <cmath>
#include <string>

namespace gnnrx::nn {

Matrix glorot_init(int fan_in, int fan_out, Rng& rng)
{
    if (fan_in < 1 || fan_out < 1) {
        throw ShapeError("glorot_init: fan dimensions must be positive");
    }
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
    Matrix w(fan_out, fan_in);
    for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) {
            w(r, c) = dist(rng);
        }
    }
    return w;
}

Matrix normal_init(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = dist(rng);
        }
    }
    return m;
}

Mlp make_mlp(std::vector<int> layer_dims, Rng& rng)
{
    if (layer_dims.size() < 2) {
        throw ShapeError("make_mlp: need at least input and output dimension");
    }
    Mlp mlp;
    mlp.layer_dims = std::move(layer_dims);
    for (std::size_t k = 0; k + 1 < mlp.layer_dims.size(); ++k) {
        mlp.weights.push_back(glorot_init(mlp.layer_dims[k], mlp.layer_dims[k + 1], rng));
        mlp.biases.push_back(Eigen::VectorXd::Zero(mlp.layer_dims[k + 1]));
    }
    return mlp;
}

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& input)
{
    if (input.size() != mlp.input_dim()) {
        throw ShapeError("mlp_forward: input length " + std::to_string(input.size()) + ", expected " +
                         std::to_string(mlp.input_dim()));
    }
    Eigen::VectorXd h = input;
    for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
        h = mlp.weights[k] * h + mlp.biases[k];
        if (k + 1 < mlp.weights.size()) {
            h = h.cwiseMax(0.0);
        }
    }
    return h;
}

MlpHandle add_mlp(ParameterSet& params, std::string_view prefix, const Mlp& mlp)
{
    MlpHandle h;
    h.layer_dims = mlp.layer_dims;
    for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
        const std::string p(prefix);
        h.weight_ids.push_back(params.add(p + ".w" + std::to_string(k), mlp.weights[k]));
        h.bias_ids.push_back(params.add(p + ".b" + std::to_string(k), Matrix(mlp.biases[k])));
    }
    return h;
}

Mlp mlp_view(const ParameterSet& params, const MlpHandle& handle)
{
    Mlp mlp;
    mlp.layer_dims = handle.layer_dims;
    for (std::size_t k = 0; k < handle.weight_ids.size(); ++k) {
        mlp.weights.push_back(params.value(handle.weight_ids[k]));
        mlp.biases.push_back(params.value(handle.bias_ids[k]).col(0));
    }
    return mlp;
}

Tape::Var mlp_apply(Tape& tape, const MlpHandle& handle, Tape::Var x)
{
    const std::size_t layers = handle.weight_ids.size();
    for (std::size_t k = 0; k < layers; ++k) {
        x = tape.affine(x, tape.parameter(handle.weight_ids[k]), tape.parameter(handle.bias_ids[k]));
        if (k + 1 < layers) {
            x = tape.relu(x);
        }
    }
    return x;
}

} // namespace gnnrx::nn
