#pragma once

// Reverse-mode differentiation over dense float64 matrices.
//
// A Tape records every operation of one forward pass. Values are Eigen
// matrices; rows usually index nodes or edges of a (batched) graph and
// columns index features. backward() walks the tape in reverse order and
// returns one gradient per entry of the bound ParameterSet.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gnnrx::nn {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexList = std::shared_ptr<const std::vector<Index>>;

inline IndexList make_index_list(std::vector<Index> idx)
{
    return std::make_shared<const std::vector<Index>>(std::move(idx));
}

/// Ordered, named collection of trainable arrays.
class ParameterSet {
public:
    std::size_t add(std::string name, Matrix value);

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] const std::string& name(std::size_t i) const { return names_.at(i); }
    [[nodiscard]] Matrix& value(std::size_t i) { return values_.at(i); }
    [[nodiscard]] const Matrix& value(std::size_t i) const { return values_.at(i); }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
    [[nodiscard]] std::size_t index(std::string_view name) const;
    /// Total number of scalars over all arrays.
    [[nodiscard]] std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

struct GradientRecord {
    double loss_value = 0.0;
    /// Index-aligned with the ParameterSet; unreachable parameters get zeros.
    std::vector<Matrix> gradients;

    static GradientRecord zeros_like(const ParameterSet& params);
    void accumulate(const GradientRecord& other, double weight = 1.0);
    [[nodiscard]] bool all_finite() const;
};

class Tape {
public:
    struct Var {
        std::size_t id = 0;
    };

    explicit Tape(const ParameterSet& params);

    Var constant(Matrix value);
    /// Leaf bound to parameter `index`; repeated calls return the same node.
    Var parameter(std::size_t index);

    [[nodiscard]] const Matrix& value(Var v) const { return nodes_[v.id].value; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var hadamard(Var a, Var b);
    /// a · b
    Var matmul(Var a, Var b);
    /// x · wᵀ + 1 · bᵀ with w of shape (out, in) and b of shape (out, 1).
    Var affine(Var x, Var w, Var b);
    Var relu(Var x);
    Var concat_cols(std::span<const Var> parts);
    Var concat_rows(std::span<const Var> parts);
    /// out.row(k) = x.row(idx[k])
    Var gather_rows(Var x, IndexList idx);
    /// out.row(s) = mean of x.row(k) over all k with segment[k] == s; empty segments give zero.
    Var segment_mean(Var x, IndexList segment, Index num_segments);
    /// out.row(r) = M_r · x.row(r)ᵀ where M_r is row r of `mats` read as a row-major d×d matrix.
    Var row_matvec(Var mats, Var x);
    /// Mean over all entries, 1×1.
    Var mean_all(Var x);
    /// Sum of squares over all entries, 1×1.
    Var sum_squares(Var x);
    /// Mean binary cross-entropy in bits of LLRs (positive favours bit 0) against 0/1 targets, 1×1.
    Var bce_llr(Var llr, std::shared_ptr<const Matrix> bits);
    /// Arithmetic mean of 1×1 scalars.
    Var average(std::span<const Var> scalars);

    /// Gradients of a 1×1 loss with respect to every parameter of the bound set.
    /// Throws NumericalDivergence when the loss is not finite.
    GradientRecord backward(Var loss);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        std::optional<std::size_t> param;
        std::function<void(Tape&, const Node&)> backprop;
    };

    Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backprop = {});
    [[nodiscard]] bool needs(Var v) const { return nodes_[v.id].needs_grad; }
    Matrix& grad_of(Var v);

    const ParameterSet* params_;
    std::vector<Node> nodes_;
    std::vector<std::optional<std::size_t>> param_nodes_;
};

} // namespace gnnrx::nn
