#include "gnnrx/link.hpp"

#include "gnnrx/errors.hpp"

namespace gnnrx {

int LinkSetup::bits_per_symbol() const { return Constellation(modulation_order).bits_per_symbol(); }

int LinkSetup::symbols() const
{
    if (!coded()) return num_symbols;
    return (code->cols() - code->punctured_count()) / bits_per_symbol();
}

double LinkSetup::code_rate() const
{
    if (!coded()) return 1.0;
    return static_cast<double>(encoder->dimension()) / static_cast<double>(code->cols() - code->punctured_count());
}

double LinkSetup::noise_variance(double snr_db) const
{
    if (snr_axis == SnrAxis::es_n0) return snr_to_sigma2(snr_db);
    return ebn0_to_sigma2(snr_db, code_rate(), bits_per_symbol());
}

void LinkSetup::attach_code(std::shared_ptr<const ParityCheckMatrix> pcm, std::uint64_t interleaver_seed)
{
    const int sent = pcm->cols() - pcm->punctured_count();
    if (sent % bits_per_symbol() != 0) {
        throw ShapeError("transmitted code length " + std::to_string(sent) + " is not a multiple of log2(M)");
    }
    code = std::move(pcm);
    encoder = std::make_shared<const LdpcEncoder>(*code);
    interleaver = Interleaver::random(sent, interleaver_seed);
}

LinkFrame draw_frame(const LinkSetup& link, double snr_db, Rng& rng)
{
    const Constellation con(link.modulation_order);
    LinkFrame f;
    if (link.coded()) {
        f.info = random_bits(static_cast<std::size_t>(link.encoder->dimension()), rng);
        f.code_bits = link.encoder->encode(f.info);
        Bits sent;
        for (std::size_t c = 0; c < f.code_bits.size(); ++c) {
            if (!link.code->puncture_mask()[c]) sent.push_back(f.code_bits[c]);
        }
        f.tx_bits = link.interleaver.interleave(sent);
    } else {
        if (link.num_symbols < 1) throw std::invalid_argument("uncoded link needs num_symbols");
        f.tx_bits = random_bits(static_cast<std::size_t>(link.num_symbols * con.bits_per_symbol()), rng);
        f.info = f.tx_bits;
        f.code_bits = f.tx_bits;
    }
    f.true_cir = link.random_channel ? random_cir(link.cir.memory(), rng) : link.cir;
    const double s2 = link.noise_variance(snr_db);
    f.rx.y = apply_isi(modulate(f.tx_bits, con), f.true_cir, s2, rng);
    f.rx.noise_variance = s2;
    f.rx.cir = link.csi_error_variance > 0.0 ? perturb_csi(f.true_cir, link.csi_error_variance, rng) : f.true_cir;
    return f;
}

std::vector<double> tx_to_code_order(const LinkSetup& link, std::span<const double> tx)
{
    if (!link.coded()) return {tx.begin(), tx.end()};
    const std::vector<double> sent = link.interleaver.deinterleave(std::vector<double>(tx.begin(), tx.end()));
    std::vector<double> out(static_cast<std::size_t>(link.code->cols()), 0.0);
    std::size_t t = 0;
    for (std::size_t c = 0; c < out.size(); ++c) {
        if (!link.code->puncture_mask()[c]) out[c] = sent[t++];
    }
    return out;
}

std::vector<double> code_to_tx_order(const LinkSetup& link, std::span<const double> code)
{
    if (!link.coded()) return {code.begin(), code.end()};
    std::vector<double> sent;
    for (std::size_t c = 0; c < code.size(); ++c) {
        if (!link.code->puncture_mask()[c]) sent.push_back(code[c]);
    }
    return link.interleaver.interleave(sent);
}

BipartiteGraph build_link_graph(const LinkSetup& link, DetectionGraphKind kind, bool joint)
{
    const int nx = link.symbols();
    const int L = link.cir.memory();
    BipartiteGraph det = kind == DetectionGraphKind::ffg ? build_ffg(nx, L) : build_ufg(nx, L);
    if (!joint) return det;
    if (!link.coded()) throw std::invalid_argument("joint graph needs a code");
    return build_joint(det, *link.code, link.interleaver, link.bits_per_symbol());
}

} // namespace gnnrx
