#pragma once

// Modulation, tapped-delay-line ISI channel, channel matrix and CSI helpers.
//
// Noise convention: z ~ CN(0, σ²) with σ² the total complex variance, so every
// likelihood exponent in this project is −|·|²/σ².

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gnnrx {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Rng = std::mt19937_64;
using Bits = std::vector<std::uint8_t>;

/// Gray-labelled, unit-average-energy constellation. M = 2 is BPSK (bit b ↦ 1−2b);
/// M = 4^k is square QAM with the first half of each label on the in-phase axis.
class Constellation {
public:
    explicit Constellation(int order);

    [[nodiscard]] int order() const { return static_cast<int>(points_.size()); }
    [[nodiscard]] int bits_per_symbol() const { return bits_; }
    [[nodiscard]] const std::vector<Complex>& points() const { return points_; }
    [[nodiscard]] Complex point(int index) const { return points_[static_cast<std::size_t>(index)]; }
    /// Bit k (MSB first) of the label of point `index`.
    [[nodiscard]] int bit(int index, int k) const { return (labels_[static_cast<std::size_t>(index)] >> (bits_ - 1 - k)) & 1; }
    [[nodiscard]] int label(int index) const { return labels_[static_cast<std::size_t>(index)]; }
    /// Point index carrying the given label.
    [[nodiscard]] int index_of_label(int label) const { return by_label_[static_cast<std::size_t>(label)]; }
    [[nodiscard]] bool is_real() const { return order() == 2; }

private:
    int bits_ = 1;
    std::vector<Complex> points_;
    std::vector<int> labels_;
    std::vector<int> by_label_;
};

/// Channel impulse response h_0..h_L.
struct Cir {
    std::vector<Complex> taps;

    [[nodiscard]] int memory() const { return static_cast<int>(taps.size()) - 1; }
    [[nodiscard]] double energy() const;
    [[nodiscard]] bool is_real() const;
};

/// Parses "proakis-c" or a comma list of real values / complex literals such as "0.5+0.1j".
Cir parse_cir(std::string_view text);
Cir proakis_c();
std::string format_cir(const Cir& cir);

struct TransmissionRecord {
    Bits info_bits;
    Bits code_bits;
    CVector symbols;      // length N_x
    CVector observations; // length N_x + L
    double noise_variance = 0.0;
    Cir cir;
};

/// Maps groups of log2(M) bits to points. Throws std::invalid_argument on a ragged bit count.
CVector modulate(std::span<const std::uint8_t> bits, const Constellation& c);

/// Nearest-point decisions, log2(M) bits per symbol.
Bits demodulate_hard(const CVector& symbols, const Constellation& c);

/// y_i = Σ_l h_l x_{i−l} + z_i for i = 0..N_x+L−1 with zero boundary symbols.
CVector apply_isi(const CVector& symbols, const Cir& cir, double noise_variance, Rng& rng);

/// CN(0, σ²) samples.
CVector complex_noise(Eigen::Index n, double noise_variance, Rng& rng);

/// Banded Toeplitz H of shape (N_x+L) × (N_x+2L) acting on x̃ = [0_L, x, 0_L].
CMatrix build_channel_matrix(const Cir& cir, int num_symbols);

/// Zero-pads x to x̃.
CVector zero_pad(const CVector& symbols, int memory);

struct UfgStatistics {
    CMatrix gram;             // G = HᴴH
    CVector matched;          // χ = Hᴴy, length N_x + 2L
    std::vector<bool> is_virtual;
};

UfgStatistics ufg_statistics(const CMatrix& channel_matrix, const CVector& observations, int memory);

/// i.i.d. complex Gaussian taps normalised to unit energy.
Cir random_cir(int memory, Rng& rng);

/// h' = h + n'. Real CIRs receive real N(0, variance) noise per tap; complex CIRs
/// receive CN(0, variance) (variance/2 per real dimension).
Cir perturb_csi(const Cir& cir, double variance, Rng& rng);

/// σ² = 1 / (R_c · log2(M) · 10^(EbN0/10)).
double ebn0_to_sigma2(double ebn0_db, double code_rate, int bits_per_symbol);

/// σ² = 10^(−SNR/10) for unit-energy symbols (Es/N0 axis).
double snr_to_sigma2(double snr_db);

/// Uniform random bits.
Bits random_bits(std::size_t n, Rng& rng);

} // namespace gnnrx
