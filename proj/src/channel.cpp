#include "gnnrx/channel.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace gnnrx {

Constellation::Constellation(int order)
{
    if (order < 2 || !std::has_single_bit(static_cast<unsigned>(order))) {
        throw std::invalid_argument("constellation order must be a power of two >= 2");
    }
    bits_ = std::countr_zero(static_cast<unsigned>(order));
    if (order == 2) {
        points_ = {Complex(1.0, 0.0), Complex(-1.0, 0.0)};
        labels_ = {0, 1};
    } else {
        if (bits_ % 2 != 0) {
            throw std::invalid_argument("only square QAM orders (4, 16, 64, ...) are supported");
        }
        const int half = bits_ / 2;
        const int side = 1 << half;
        const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
        // Axis index k has amplitude (side−1) − 2k and Gray label k ^ (k >> 1),
        // so label MSB 0 is the positive half-axis as for BPSK.
        for (int ki = 0; ki < side; ++ki) {
            for (int kq = 0; kq < side; ++kq) {
                const double re = (side - 1) - 2.0 * ki;
                const double im = (side - 1) - 2.0 * kq;
                points_.emplace_back(re * scale, im * scale);
                const int gi = ki ^ (ki >> 1);
                const int gq = kq ^ (kq >> 1);
                labels_.push_back((gi << half) | gq);
            }
        }
    }
    by_label_.assign(points_.size(), -1);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        by_label_[static_cast<std::size_t>(labels_[i])] = static_cast<int>(i);
    }
}

double Cir::energy() const
{
    double e = 0.0;
    for (auto h : taps) {
        e += std::norm(h);
    }
    return e;
}

bool Cir::is_real() const
{
    return std::all_of(taps.begin(), taps.end(), [](Complex h) { return h.imag() == 0.0; });
}

Cir proakis_c() { return Cir{{0.227, 0.460, 0.688, 0.460, 0.227}}; }

namespace {

double parse_double(std::string_view s, std::string_view whole)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError("invalid CIR tap '" + std::string(s) + "' in '" + std::string(whole) + "'", 0);
    }
    return v;
}

Complex parse_tap(std::string_view tok, std::string_view whole)
{
    if (tok.empty()) {
        throw ParseError("empty CIR tap in '" + std::string(whole) + "'", 0);
    }
    const char last = tok.back();
    if (last != 'j' && last != 'i') {
        return {parse_double(tok, whole), 0.0};
    }
    tok.remove_suffix(1);
    // split at the last sign that is not the leading one and not part of an exponent
    std::size_t split = std::string_view::npos;
    for (std::size_t k = tok.size(); k-- > 1;) {
        if ((tok[k] == '+' || tok[k] == '-') && tok[k - 1] != 'e' && tok[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    if (split == std::string_view::npos) {
        return {0.0, parse_double(tok, whole)};
    }
    std::string_view re = tok.substr(0, split);
    std::string_view im = tok.substr(split);
    if (im.front() == '+') {
        im.remove_prefix(1);
    }
    return {parse_double(re, whole), parse_double(im, whole)};
}

} // namespace

Cir parse_cir(std::string_view text)
{
    std::string cleaned;
    for (char ch : text) {
        if (!std::isspace(static_cast<unsigned char>(ch))) {
            cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (cleaned == "proakis-c" || cleaned == "proakisc") {
        return proakis_c();
    }
    Cir cir;
    std::string_view rest = cleaned;
    while (true) {
        auto comma = rest.find(',');
        cir.taps.push_back(parse_tap(rest.substr(0, comma), text));
        if (comma == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(comma + 1);
    }
    return cir;
}

std::string format_cir(const Cir& cir)
{
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < cir.taps.size(); ++i) {
        if (i) os << ',';
        os << cir.taps[i].real();
        if (cir.taps[i].imag() != 0.0) {
            os << (cir.taps[i].imag() < 0 ? "" : "+") << cir.taps[i].imag() << 'j';
        }
    }
    return os.str();
}

CVector modulate(std::span<const std::uint8_t> bits, const Constellation& c)
{
    const int k = c.bits_per_symbol();
    if (bits.size() % static_cast<std::size_t>(k) != 0) {
        throw std::invalid_argument("modulate: bit count " + std::to_string(bits.size()) +
                                    " not divisible by " + std::to_string(k));
    }
    CVector x(static_cast<Eigen::Index>(bits.size() / static_cast<std::size_t>(k)));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        int label = 0;
        for (int b = 0; b < k; ++b) {
            label = (label << 1) | (bits[static_cast<std::size_t>(i * k + b)] & 1);
        }
        x(i) = c.point(c.index_of_label(label));
    }
    return x;
}

Bits demodulate_hard(const CVector& symbols, const Constellation& c)
{
    Bits out;
    out.reserve(static_cast<std::size_t>(symbols.size() * c.bits_per_symbol()));
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
        int best = 0;
        double best_d = std::norm(symbols(i) - c.point(0));
        for (int s = 1; s < c.order(); ++s) {
            const double dist = std::norm(symbols(i) - c.point(s));
            if (dist < best_d) {
                best_d = dist;
                best = s;
            }
        }
        for (int b = 0; b < c.bits_per_symbol(); ++b) {
            out.push_back(static_cast<std::uint8_t>(c.bit(best, b)));
        }
    }
    return out;
}

CVector complex_noise(Eigen::Index n, double noise_variance, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, std::sqrt(noise_variance / 2.0));
    CVector z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double re = dist(rng);
        const double im = dist(rng);
        z(i) = Complex(re, im);
    }
    return z;
}

CVector apply_isi(const CVector& symbols, const Cir& cir, double noise_variance, Rng& rng)
{
    if (noise_variance < 0.0) {
        throw std::invalid_argument("apply_isi: negative noise variance");
    }
    if (cir.taps.empty()) {
        throw ShapeError("apply_isi: empty CIR");
    }
    const int L = cir.memory();
    const Eigen::Index n = symbols.size();
    CVector y = CVector::Zero(n + L);
    for (Eigen::Index i = 0; i < n + L; ++i) {
        Complex acc = 0.0;
        for (int l = 0; l <= L; ++l) {
            const Eigen::Index j = i - l;
            if (j >= 0 && j < n) {
                acc += cir.taps[static_cast<std::size_t>(l)] * symbols(j);
            }
        }
        y(i) = acc;
    }
    if (noise_variance > 0.0) {
        y += complex_noise(n + L, noise_variance, rng);
    }
    return y;
}

CMatrix build_channel_matrix(const Cir& cir, int num_symbols)
{
    if (num_symbols < 1) {
        throw std::invalid_argument("build_channel_matrix: N_x must be >= 1");
    }
    const int L = cir.memory();
    CMatrix h = CMatrix::Zero(num_symbols + L, num_symbols + 2 * L);
    for (int i = 0; i < num_symbols + L; ++i) {
        for (int k = 0; k <= L; ++k) {
            h(i, i + k) = cir.taps[static_cast<std::size_t>(L - k)];
        }
    }
    return h;
}

CVector zero_pad(const CVector& symbols, int memory)
{
    CVector xt = CVector::Zero(symbols.size() + 2 * memory);
    xt.segment(memory, symbols.size()) = symbols;
    return xt;
}

UfgStatistics ufg_statistics(const CMatrix& channel_matrix, const CVector& observations, int memory)
{
    if (channel_matrix.rows() != observations.size()) {
        throw ShapeError("ufg_statistics: H rows differ from observation length");
    }
    UfgStatistics s;
    s.gram = channel_matrix.adjoint() * channel_matrix;
    s.matched = channel_matrix.adjoint() * observations;
    const auto n = static_cast<int>(channel_matrix.cols());
    s.is_virtual.assign(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        s.is_virtual[static_cast<std::size_t>(i)] = i < memory || i >= n - memory;
    }
    return s;
}

Cir random_cir(int memory, Rng& rng)
{
    if (memory < 0) {
        throw std::invalid_argument("random_cir: memory must be >= 0");
    }
    Cir cir;
    std::normal_distribution<double> dist(0.0, 1.0);
    double e = 0.0;
    for (int l = 0; l <= memory; ++l) {
        const double re = dist(rng);
        const double im = dist(rng);
        cir.taps.emplace_back(re, im);
        e += re * re + im * im;
    }
    const double s = 1.0 / std::sqrt(e);
    for (auto& h : cir.taps) {
        h *= s;
    }
    return cir;
}

Cir perturb_csi(const Cir& cir, double variance, Rng& rng)
{
    if (variance < 0.0) {
        throw std::invalid_argument("perturb_csi: negative variance");
    }
    Cir out = cir;
    if (variance == 0.0) {
        return out;
    }
    if (cir.is_real()) {
        std::normal_distribution<double> dist(0.0, std::sqrt(variance));
        for (auto& h : out.taps) {
            h += dist(rng);
        }
    } else {
        std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
        for (auto& h : out.taps) {
            const double re = dist(rng);
            const double im = dist(rng);
            h += Complex(re, im);
        }
    }
    return out;
}

double ebn0_to_sigma2(double ebn0_db, double code_rate, int bits_per_symbol)
{
    if (!(code_rate > 0.0) || code_rate > 1.0) {
        throw std::invalid_argument("ebn0_to_sigma2: code rate must be in (0, 1]");
    }
    if (bits_per_symbol < 1) {
        throw std::invalid_argument("ebn0_to_sigma2: bits per symbol must be >= 1");
    }
    return 1.0 / (code_rate * bits_per_symbol * std::pow(10.0, ebn0_db / 10.0));
}

double snr_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

Bits random_bits(std::size_t n, Rng& rng)
{
    Bits b(n);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& v : b) {
        v = static_cast<std::uint8_t>(coin(rng));
    }
    return b;
}

} // namespace gnnrx
