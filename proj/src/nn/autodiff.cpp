#include "gnnrx/nn/autodiff.hpp"

#include "gnnrx/errors.hpp"

#include <cmath>
#include <numbers>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gnnrx::nn {

std::size_t ParameterSet::add(std::string name, Matrix value)
{
    if (lookup_.contains(name)) {
        throw std::invalid_argument("duplicate parameter name: " + name);
    }
    lookup_.emplace(name, values_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const
{
    auto it = lookup_.find(std::string(name));
    if (it == lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t ParameterSet::index(std::string_view name) const
{
    auto i = find(name);
    if (!i) {
        throw std::out_of_range("unknown parameter: " + std::string(name));
    }
    return *i;
}

std::size_t ParameterSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& v : values_) {
        n += static_cast<std::size_t>(v.size());
    }
    return n;
}

GradientRecord GradientRecord::zeros_like(const ParameterSet& params)
{
    GradientRecord rec;
    rec.gradients.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        rec.gradients.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    }
    return rec;
}

void GradientRecord::accumulate(const GradientRecord& other, double weight)
{
    if (gradients.size() != other.gradients.size()) {
        throw ShapeError("gradient records of different length");
    }
    loss_value += weight * other.loss_value;
    for (std::size_t i = 0; i < gradients.size(); ++i) {
        gradients[i] += weight * other.gradients[i];
    }
}

bool GradientRecord::all_finite() const
{
    if (!std::isfinite(loss_value)) {
        return false;
    }
    for (const auto& g : gradients) {
        if (!g.allFinite()) {
            return false;
        }
    }
    return true;
}

namespace {
// Batched activations are a few MB each; without this glibc maps and unmaps every one of them.
void keep_large_blocks_on_heap()
{
#if defined(__GLIBC__)
    static const bool once = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)once;
#endif
}
} // namespace

Tape::Tape(const ParameterSet& params) : params_(&params), param_nodes_(params.size())
{
    keep_large_blocks_on_heap();
    nodes_.reserve(512);
}

Tape::Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backprop)
{
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) {
        n.backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_of(Var v)
{
    auto& n = nodes_[v.id];
    if (n.grad.size() == 0) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Tape::Var Tape::parameter(std::size_t index)
{
    if (index >= param_nodes_.size()) {
        throw std::out_of_range("parameter index out of range");
    }
    if (param_nodes_[index]) {
        return Var{*param_nodes_[index]};
    }
    Var v = push(params_->value(index), true);
    nodes_[v.id].param = index;
    param_nodes_[index] = v.id;
    return v;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}
} // namespace

Tape::Var Tape::add(Var a, Var b)
{
    require_same_shape(value(a), value(b), "add");
    return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
        if (t.needs(a)) t.grad_of(a) += self.grad;
        if (t.needs(b)) t.grad_of(b) += self.grad;
    });
}

Tape::Var Tape::sub(Var a, Var b)
{
    require_same_shape(value(a), value(b), "sub");
    return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
        if (t.needs(a)) t.grad_of(a) += self.grad;
        if (t.needs(b)) t.grad_of(b) -= self.grad;
    });
}

Tape::Var Tape::scale(Var a, double s)
{
    return push(s * value(a), needs(a), [a, s](Tape& t, const Node& self) { t.grad_of(a) += s * self.grad; });
}

Tape::Var Tape::hadamard(Var a, Var b)
{
    require_same_shape(value(a), value(b), "hadamard");
    return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
        if (t.needs(a)) t.grad_of(a) += self.grad.cwiseProduct(t.value(b));
        if (t.needs(b)) t.grad_of(b) += self.grad.cwiseProduct(t.value(a));
    });
}

Tape::Var Tape::matmul(Var a, Var b)
{
    if (value(a).cols() != value(b).rows()) {
        throw ShapeError("matmul: inner dimensions differ");
    }
    return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, const Node& self) {
        if (t.needs(a)) t.grad_of(a).noalias() += self.grad * t.value(b).transpose();
        if (t.needs(b)) t.grad_of(b).noalias() += t.value(a).transpose() * self.grad;
    });
}

Tape::Var Tape::affine(Var x, Var w, Var b)
{
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    if (xv.cols() != wv.cols() || bv.rows() != wv.rows() || bv.cols() != 1) {
        throw ShapeError("affine: input has " + std::to_string(xv.cols()) + " features, weight expects " +
                         std::to_string(wv.cols()));
    }
    Matrix out = xv * wv.transpose();
    out.rowwise() += bv.col(0).transpose();
    return push(std::move(out), needs(x) || needs(w) || needs(b), [x, w, b](Tape& t, const Node& self) {
        if (t.needs(x)) t.grad_of(x).noalias() += self.grad * t.value(w);
        if (t.needs(w)) t.grad_of(w).noalias() += self.grad.transpose() * t.value(x);
        if (t.needs(b)) t.grad_of(b) += self.grad.colwise().sum().transpose();
    });
}

Tape::Var Tape::relu(Var x)
{
    return push(value(x).cwiseMax(0.0), needs(x), [x](Tape& t, const Node& self) {
        t.grad_of(x) += (t.value(x).array() > 0.0).select(self.grad, 0.0);
    });
}

Tape::Var Tape::concat_cols(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw ShapeError("concat_cols: no inputs");
    }
    const Index rows = value(parts[0]).rows();
    Index cols = 0;
    bool ng = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) {
            throw ShapeError("concat_cols: row counts differ");
        }
        cols += value(p).cols();
        ng = ng || needs(p);
    }
    Matrix out(rows, cols);
    Index c = 0;
    for (Var p : parts) {
        out.middleCols(c, value(p).cols()) = value(p);
        c += value(p).cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), ng, [ps](Tape& t, const Node& self) {
        Index c0 = 0;
        for (Var p : ps) {
            const Index w = t.value(p).cols();
            if (t.needs(p)) t.grad_of(p) += self.grad.middleCols(c0, w);
            c0 += w;
        }
    });
}

Tape::Var Tape::concat_rows(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw ShapeError("concat_rows: no inputs");
    }
    const Index cols = value(parts[0]).cols();
    Index rows = 0;
    bool ng = false;
    for (Var p : parts) {
        if (value(p).cols() != cols && value(p).rows() != 0) {
            throw ShapeError("concat_rows: column counts differ");
        }
        rows += value(p).rows();
        ng = ng || needs(p);
    }
    Matrix out(rows, cols);
    Index r = 0;
    for (Var p : parts) {
        if (value(p).rows() == 0) continue;
        out.middleRows(r, value(p).rows()) = value(p);
        r += value(p).rows();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), ng, [ps](Tape& t, const Node& self) {
        Index r0 = 0;
        for (Var p : ps) {
            const Index h = t.value(p).rows();
            if (h == 0) continue;
            if (t.needs(p)) t.grad_of(p) += self.grad.middleRows(r0, h);
            r0 += h;
        }
    });
}

Tape::Var Tape::gather_rows(Var x, IndexList idx)
{
    const Matrix& xv = value(x);
    Matrix out(static_cast<Index>(idx->size()), xv.cols());
    for (Index k = 0; k < out.rows(); ++k) {
        const Index src = (*idx)[static_cast<std::size_t>(k)];
        if (src < 0 || src >= xv.rows()) {
            throw ShapeError("gather_rows: index out of range");
        }
        out.row(k) = xv.row(src);
    }
    return push(std::move(out), needs(x), [x, idx](Tape& t, const Node& self) {
        Matrix& g = t.grad_of(x);
        for (Index k = 0; k < self.grad.rows(); ++k) {
            g.row((*idx)[static_cast<std::size_t>(k)]) += self.grad.row(k);
        }
    });
}

Tape::Var Tape::segment_mean(Var x, IndexList segment, Index num_segments)
{
    const Matrix& xv = value(x);
    if (static_cast<Index>(segment->size()) != xv.rows()) {
        throw ShapeError("segment_mean: segment list length differs from row count");
    }
    auto counts = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(num_segments));
    Matrix out = Matrix::Zero(num_segments, xv.cols());
    for (Index k = 0; k < xv.rows(); ++k) {
        const Index s = (*segment)[static_cast<std::size_t>(k)];
        if (s < 0 || s >= num_segments) {
            throw ShapeError("segment_mean: segment index out of range");
        }
        out.row(s) += xv.row(k);
        (*counts)(s) += 1.0;
    }
    for (Index s = 0; s < num_segments; ++s) {
        if ((*counts)(s) > 0) {
            out.row(s) /= (*counts)(s);
        }
    }
    return push(std::move(out), needs(x), [x, segment, counts](Tape& t, const Node& self) {
        Matrix& g = t.grad_of(x);
        for (Index k = 0; k < g.rows(); ++k) {
            const Index s = (*segment)[static_cast<std::size_t>(k)];
            g.row(k) += self.grad.row(s) / (*counts)(s);
        }
    });
}

Tape::Var Tape::row_matvec(Var mats, Var x)
{
    const Matrix& mv = value(mats);
    const Matrix& xv = value(x);
    const Index d = xv.cols();
    if (mv.rows() != xv.rows() || mv.cols() != d * d) {
        throw ShapeError("row_matvec: expected " + std::to_string(d * d) + " matrix entries per row");
    }
    Matrix out = Matrix::Zero(xv.rows(), d);
    for (Index r = 0; r < xv.rows(); ++r) {
        for (Index i = 0; i < d; ++i) {
            double acc = 0.0;
            for (Index j = 0; j < d; ++j) {
                acc += mv(r, i * d + j) * xv(r, j);
            }
            out(r, i) = acc;
        }
    }
    return push(std::move(out), needs(mats) || needs(x), [mats, x, d](Tape& t, const Node& self) {
        const Matrix& m = t.value(mats);
        const Matrix& xx = t.value(x);
        if (t.needs(mats)) {
            Matrix& gm = t.grad_of(mats);
            for (Index r = 0; r < xx.rows(); ++r)
                for (Index i = 0; i < d; ++i)
                    for (Index j = 0; j < d; ++j) gm(r, i * d + j) += self.grad(r, i) * xx(r, j);
        }
        if (t.needs(x)) {
            Matrix& gx = t.grad_of(x);
            for (Index r = 0; r < xx.rows(); ++r)
                for (Index i = 0; i < d; ++i)
                    for (Index j = 0; j < d; ++j) gx(r, j) += m(r, i * d + j) * self.grad(r, i);
        }
    });
}

Tape::Var Tape::mean_all(Var x)
{
    const double n = static_cast<double>(value(x).size());
    Matrix out(1, 1);
    out(0, 0) = value(x).sum() / n;
    return push(std::move(out), needs(x), [x, n](Tape& t, const Node& self) {
        t.grad_of(x).array() += self.grad(0, 0) / n;
    });
}

Tape::Var Tape::sum_squares(Var x)
{
    Matrix out(1, 1);
    out(0, 0) = value(x).squaredNorm();
    return push(std::move(out), needs(x), [x](Tape& t, const Node& self) {
        t.grad_of(x) += 2.0 * self.grad(0, 0) * t.value(x);
    });
}

Tape::Var Tape::bce_llr(Var llr, std::shared_ptr<const Matrix> bits)
{
    const Matrix& l = value(llr);
    require_same_shape(l, *bits, "bce_llr");
    const double n = static_cast<double>(l.size());
    // log2(1 + exp(-s·ℓ)), s = 1 − 2c, evaluated without overflow.
    double acc = 0.0;
    for (Index j = 0; j < l.cols(); ++j) {
        for (Index i = 0; i < l.rows(); ++i) {
            const double z = -(1.0 - 2.0 * (*bits)(i, j)) * l(i, j);
            acc += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
        }
    }
    Matrix out(1, 1);
    out(0, 0) = acc / (n * std::numbers::ln2);
    return push(std::move(out), needs(llr), [llr, bits, n](Tape& t, const Node& self) {
        const Matrix& lv = t.value(llr);
        Matrix& g = t.grad_of(llr);
        const double k = self.grad(0, 0) / (n * std::numbers::ln2);
        for (Index j = 0; j < lv.cols(); ++j) {
            for (Index i = 0; i < lv.rows(); ++i) {
                const double s = 1.0 - 2.0 * (*bits)(i, j);
                const double z = -s * lv(i, j);
                const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                g(i, j) += k * (-s) * sig;
            }
        }
    });
}

Tape::Var Tape::average(std::span<const Var> scalars)
{
    if (scalars.empty()) {
        throw std::invalid_argument("average: empty list");
    }
    double acc = 0.0;
    bool ng = false;
    for (Var s : scalars) {
        if (value(s).size() != 1) {
            throw ShapeError("average: inputs must be 1x1");
        }
        acc += value(s)(0, 0);
        ng = ng || needs(s);
    }
    const double n = static_cast<double>(scalars.size());
    Matrix out(1, 1);
    out(0, 0) = acc / n;
    std::vector<Var> ss(scalars.begin(), scalars.end());
    return push(std::move(out), ng, [ss, n](Tape& t, const Node& self) {
        for (Var s : ss) {
            if (t.needs(s)) t.grad_of(s)(0, 0) += self.grad(0, 0) / n;
        }
    });
}

GradientRecord Tape::backward(Var loss)
{
    if (value(loss).size() != 1) {
        throw ShapeError("backward: loss must be 1x1");
    }
    GradientRecord rec = GradientRecord::zeros_like(*params_);
    rec.loss_value = value(loss)(0, 0);
    if (!std::isfinite(rec.loss_value)) {
        throw NumericalDivergence("non-finite loss");
    }
    if (!needs(loss)) {
        return rec;
    }
    for (auto& n : nodes_) {
        n.grad.resize(0, 0);
    }
    grad_of(loss)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.size() == 0) {
            continue;
        }
        if (n.param) {
            rec.gradients[*n.param] += n.grad;
        } else if (n.backprop) {
            n.backprop(*this, n);
        }
    }
    return rec;
}

} // namespace gnnrx::nn
