#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gnnrx {

/// Saturation magnitude used for every LLR that leaves a component.
inline constexpr double kLlrMax = 40.0;

enum class LlrRole { total, extrinsic, prior };

/// Per-bit log P(b=0)/P(b=1); positive favours bit 0.
struct LlrVector {
    std::vector<double> values;
    LlrRole role = LlrRole::total;

    LlrVector() = default;
    LlrVector(std::vector<double> v, LlrRole r) : values(std::move(v)), role(r) {}

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

inline double saturate(double llr, double limit = kLlrMax)
{
    if (llr != llr) {
        throw std::domain_error("NaN LLR");
    }
    return llr > limit ? limit : (llr < -limit ? -limit : llr);
}

/// Jacobian logarithm log Σ exp(v_k), stabilised by the maximum. Throws on empty input.
double max_star(std::span<const double> values);
/// Two-argument form.
double max_star(double a, double b);

/// ℓ_E = ℓ_T − ℓ_A, saturated. Roles must be total and prior.
LlrVector extrinsic_llrs(const LlrVector& total, const LlrVector& prior);

} // namespace gnnrx
