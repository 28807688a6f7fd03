#include "gnnrx/llr.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnnrx {

double max_star(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("max_star: empty input");
    }
    const double m = *std::max_element(values.begin(), values.end());
    if (m == -std::numeric_limits<double>::infinity()) {
        return m;
    }
    double acc = 0.0;
    for (double v : values) {
        acc += std::exp(v - m);
    }
    return m + std::log(acc);
}

double max_star(double a, double b)
{
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) {
        return m;
    }
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

LlrVector extrinsic_llrs(const LlrVector& total, const LlrVector& prior)
{
    if (total.role != LlrRole::total || prior.role != LlrRole::prior) {
        throw std::invalid_argument("extrinsic_llrs: expected (total, prior) roles");
    }
    if (total.size() != prior.size()) {
        throw ShapeError("extrinsic_llrs: length mismatch");
    }
    LlrVector out;
    out.role = LlrRole::extrinsic;
    out.values.resize(total.size());
    for (std::size_t i = 0; i < total.size(); ++i) {
        out.values[i] = saturate(total[i] - prior[i]);
    }
    return out;
}

} // namespace gnnrx
