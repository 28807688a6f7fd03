#pragma once

// One transmission through encoder, interleaver, mapper and ISI channel.

#include "gnnrx/channel.hpp"
#include "gnnrx/gnn.hpp"
#include "gnnrx/graphs.hpp"
#include "gnnrx/ldpc.hpp"

#include <memory>

namespace gnnrx {

enum class SnrAxis { es_n0, eb_n0 };

struct LinkSetup {
    Cir cir;
    int modulation_order = 2;
    /// Block length of uncoded links; coded links derive it from the code.
    int num_symbols = 0;
    /// Draw a fresh unit-energy CIR of the same memory for every frame.
    bool random_channel = false;
    /// Receiver CSI is h + n' with this per-tap variance.
    double csi_error_variance = 0.0;
    std::shared_ptr<const ParityCheckMatrix> code;
    std::shared_ptr<const LdpcEncoder> encoder;
    Interleaver interleaver;
    SnrAxis snr_axis = SnrAxis::es_n0;

    [[nodiscard]] bool coded() const { return static_cast<bool>(code); }
    [[nodiscard]] int bits_per_symbol() const;
    [[nodiscard]] int symbols() const;
    [[nodiscard]] double code_rate() const;
    [[nodiscard]] double noise_variance(double snr_db) const;

    /// Loads the code, builds the encoder and a seeded random interleaver. Throws ShapeError when the
    /// transmitted length is not a multiple of log2(M).
    void attach_code(std::shared_ptr<const ParityCheckMatrix> pcm, std::uint64_t interleaver_seed);
};

struct LinkFrame {
    Bits info;      // encoder input (uncoded: equals tx_bits)
    Bits code_bits; // all N code bits in code order (uncoded: equals tx_bits)
    Bits tx_bits;   // mapped bits in transmission order
    FrameInput rx;
    Cir true_cir;
};

LinkFrame draw_frame(const LinkSetup& link, double snr_db, Rng& rng);

/// Code-order LLRs of all N code bits from transmission-order LLRs; punctured bits get 0.
std::vector<double> tx_to_code_order(const LinkSetup& link, std::span<const double> tx);
/// Transmission-order LLRs from code-order LLRs (punctured bits dropped).
std::vector<double> code_to_tx_order(const LinkSetup& link, std::span<const double> code);

/// Detection graph over the link's block (FFG or UFG), or the joint graph when `joint` is set.
BipartiteGraph build_link_graph(const LinkSetup& link, DetectionGraphKind kind, bool joint);

} // namespace gnnrx
