#include "gnnrx/channel.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace gnnrx;

TEST_CASE("constellations have unit energy and Gray labels")
{
    for (int m : {2, 4, 16, 64}) {
        Constellation c(m);
        double e = 0.0;
        std::set<int> labels;
        for (int s = 0; s < m; ++s) {
            e += std::norm(c.point(s));
            labels.insert(c.label(s));
            CHECK(c.index_of_label(c.label(s)) == s);
        }
        CHECK(std::abs(e / m - 1.0) < 1e-12);
        CHECK(static_cast<int>(labels.size()) == m);

        // nearest neighbours along each axis differ in exactly one bit
        double dmin = 1e9;
        for (int a = 0; a < m; ++a) {
            for (int b = a + 1; b < m; ++b) dmin = std::min(dmin, std::abs(c.point(a) - c.point(b)));
        }
        for (int a = 0; a < m; ++a) {
            for (int b = a + 1; b < m; ++b) {
                if (std::abs(std::abs(c.point(a) - c.point(b)) - dmin) < 1e-9) {
                    CHECK(__builtin_popcount(static_cast<unsigned>(c.label(a) ^ c.label(b))) == 1);
                }
            }
        }
    }
    CHECK_THROWS(Constellation(8));
    CHECK_THROWS(Constellation(3));
}

TEST_CASE("modulate: BPSK sign, 16-QAM corner, QPSK magnitude")
{
    Constellation bpsk(2);
    const Bits b{0, 1};
    const CVector x = modulate(b, bpsk);
    CHECK(x(0) == Complex(1.0, 0.0));
    CHECK(x(1) == Complex(-1.0, 0.0));

    Constellation q16(16);
    double max_axis = 0.0;
    for (const auto& p : q16.points()) max_axis = std::max(max_axis, std::abs(p.real()));
    CHECK(max_axis == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-12));

    Constellation qpsk(4);
    for (const auto& p : qpsk.points()) {
        CHECK(std::abs(p.real()) == doctest::Approx(1.0 / std::sqrt(2.0)));
        CHECK(std::abs(p) == doctest::Approx(1.0));
    }
    const Bits ragged{0, 1, 1};
    CHECK_THROWS_AS(modulate(ragged, qpsk), std::invalid_argument);
}

TEST_CASE("noiseless demodulation recovers the bits")
{
    Rng r(4);
    for (int m : {2, 4, 16, 64}) {
        Constellation c(m);
        const Bits b = random_bits(static_cast<std::size_t>(600 * c.bits_per_symbol()), r);
        CHECK(demodulate_hard(modulate(b, c), c) == b);
    }
}

TEST_CASE("apply_isi: identity, Proakis-C impulse, linearity")
{
    Rng r(1);
    Cir id{{1.0}};
    CVector x = CVector::Random(9);
    CHECK((apply_isi(x, id, 0.0, r) - x).norm() == 0.0);

    CVector imp = CVector::Zero(1);
    imp(0) = 1.0;
    const CVector y = apply_isi(imp, proakis_c(), 0.0, r);
    const double expected[] = {0.227, 0.460, 0.688, 0.460, 0.227};
    REQUIRE(y.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(y(i).real() == doctest::Approx(expected[i]).epsilon(1e-15));

    const Cir h = random_cir(3, r);
    const CVector x1 = CVector::Random(12);
    const CVector x2 = CVector::Random(12);
    const CVector lhs = apply_isi(x1 + x2, h, 0.0, r);
    const CVector rhs = apply_isi(x1, h, 0.0, r) + apply_isi(x2, h, 0.0, r);
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("channel matrix reproduces the convolution")
{
    Rng r(2);
    Cir id{{1.0}};
    const CMatrix h0 = build_channel_matrix(id, 5);
    CHECK(h0.rows() == 5);
    CHECK(h0.cols() == 5);
    CHECK((h0 - CMatrix::Identity(5, 5)).norm() == 0.0);

    const Cir h = random_cir(4, r);
    const int n = 11;
    const CMatrix H = build_channel_matrix(h, n);
    CHECK(H.rows() == n + 4);
    CHECK(H.cols() == n + 8);
    for (int i = 0; i < H.rows(); ++i) {
        for (int k = 0; k <= 4; ++k) CHECK(H(i, i + k) == h.taps[static_cast<std::size_t>(4 - k)]);
    }
    for (int trial = 0; trial < 50; ++trial) {
        const CVector x = CVector::Random(n);
        const std::vector<Complex> xs(x.data(), x.data() + n);
        const auto ref = oracle::convolve(xs, h.taps);
        const CVector got = H * zero_pad(x, 4);
        for (int i = 0; i < got.size(); ++i) CHECK(std::abs(got(i) - ref[static_cast<std::size_t>(i)]) <= 1e-12);
        CHECK((apply_isi(x, h, 0.0, r) - got).norm() < 1e-12);
    }
}

TEST_CASE("ufg statistics: identity case, band structure, Hermitian")
{
    Rng r(3);
    Cir id{{1.0}};
    const CVector y = CVector::Random(6);
    const auto s0 = ufg_statistics(build_channel_matrix(id, 6), y, 0);
    CHECK((s0.gram - CMatrix::Identity(6, 6)).norm() < 1e-15);
    CHECK((s0.matched - y).norm() < 1e-15);

    const CMatrix H = build_channel_matrix(proakis_c(), 10);
    const auto s = ufg_statistics(H, CVector::Random(H.rows()), 4);
    CHECK(s.matched.size() == 18);
    for (int i = 0; i < s.gram.rows(); ++i) {
        for (int j = 0; j < s.gram.cols(); ++j) {
            if (std::abs(i - j) > 4) CHECK(std::abs(s.gram(i, j)) == 0.0);
        }
    }
    CHECK(s.is_virtual[0]);
    CHECK(s.is_virtual[17]);
    CHECK(!s.is_virtual[4]);

    const Cir hc = random_cir(3, r);
    const CMatrix Hc = build_channel_matrix(hc, 9);
    const auto sc = ufg_statistics(Hc, CVector::Random(Hc.rows()), 3);
    CHECK((sc.gram - sc.gram.adjoint()).norm() <= 1e-12);
}

TEST_CASE("random_cir: unit energy, determinism, flat tap power")
{
    Rng a(5);
    Rng b(5);
    const Cir ha = random_cir(6, a);
    const Cir hb = random_cir(6, b);
    CHECK(ha.taps == hb.taps);
    CHECK(std::abs(ha.energy() - 1.0) < 1e-12);
    CHECK(ha.memory() == 6);

    Rng r(6);
    std::vector<double> power(4, 0.0);
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        const Cir h = random_cir(3, r);
        for (int l = 0; l < 4; ++l) power[static_cast<std::size_t>(l)] += std::norm(h.taps[static_cast<std::size_t>(l)]) / draws;
    }
    // unit energy split evenly over 4 taps; the per-tap mean power has std ≈ 0.25·0.58/√draws
    for (double p : power) CHECK(std::abs(p - 0.25) < 0.01);
}

TEST_CASE("perturb_csi: zero variance, per-tap MSE, memory")
{
    Rng r(7);
    const Cir h = proakis_c();
    CHECK(perturb_csi(h, 0.0, r).taps == h.taps);
    double mse = 0.0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        const Cir p = perturb_csi(h, 0.15, r);
        CHECK(p.memory() == h.memory());
        for (int l = 0; l <= h.memory(); ++l) mse += std::norm(p.taps[static_cast<std::size_t>(l)] - h.taps[static_cast<std::size_t>(l)]);
    }
    mse /= draws * (h.memory() + 1);
    CHECK(std::abs(mse - 0.15) < 0.05 * 0.15);

    Rng rc(8);
    const Cir hc = random_cir(2, rc);
    double mse_c = 0.0;
    for (int k = 0; k < draws; ++k) {
        const Cir p = perturb_csi(hc, 0.15, rc);
        for (int l = 0; l <= 2; ++l) mse_c += std::norm(p.taps[static_cast<std::size_t>(l)] - hc.taps[static_cast<std::size_t>(l)]);
    }
    CHECK(std::abs(mse_c / (draws * 3) - 0.15) < 0.05 * 0.15);
}

TEST_CASE("ebn0_to_sigma2")
{
    CHECK(ebn0_to_sigma2(0.0, 1.0, 1) == doctest::Approx(1.0));
    CHECK(std::abs(ebn0_to_sigma2(3.0103, 0.5, 1) - 1.0) < 1e-4);
    double prev = 1e9;
    for (double e = -5; e <= 15; e += 0.5) {
        const double s = ebn0_to_sigma2(e, 0.5, 2);
        CHECK(s < prev);
        prev = s;
    }
    CHECK_THROWS(ebn0_to_sigma2(1.0, 0.0, 1));
    CHECK(snr_to_sigma2(10.0) == doctest::Approx(0.1));
}

TEST_CASE("noise is white with the requested variance")
{
    Rng r(9);
    const int n = 200000;
    const CVector z = complex_noise(n, 0.7, r);
    CHECK(z.squaredNorm() / n == doctest::Approx(0.7).epsilon(0.02));
    for (int lag = 1; lag <= 3; ++lag) {
        Complex acc = 0.0;
        for (int i = lag; i < n; ++i) acc += z(i) * std::conj(z(i - lag));
        CHECK(std::abs(acc) / (0.7 * n) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("parse_cir accepts presets and literals")
{
    CHECK(parse_cir("proakis-c").taps == proakis_c().taps);
    const Cir h = parse_cir("0.8, 0.6");
    REQUIRE(h.taps.size() == 2);
    CHECK(h.taps[1] == Complex(0.6, 0.0));
    const Cir hc = parse_cir("0.5+0.1j,-0.2-0.3j");
    CHECK(hc.taps[0] == Complex(0.5, 0.1));
    CHECK(hc.taps[1] == Complex(-0.2, -0.3));
    CHECK(parse_cir(format_cir(hc)).taps == hc.taps);
    CHECK_THROWS(parse_cir("0.5,abc"));
    CHECK_THROWS(parse_cir(""));
}
