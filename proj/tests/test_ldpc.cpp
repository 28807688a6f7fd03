#include "gnnrx/errors.hpp"
#include "gnnrx/ldpc.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace gnnrx;

namespace {

const char* kToyAlist =
    "6 3\n"
    "2 3\n"
    "2 2 2 1 1 1\n"
    "3 3 3\n"
    "1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n"
    "1 2 4\n2 3 5\n1 3 6\n";

ParityCheckMatrix toy() { return load_alist(kToyAlist); }

// All words of length n with zero syndrome, by exhaustive search.
std::set<Bits> null_space(const ParityCheckMatrix& h)
{
    std::set<Bits> out;
    const int n = h.cols();
    for (int w = 0; w < (1 << n); ++w) {
        Bits b(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((w >> i) & 1);
        bool ok = true;
        for (int r = 0; r < h.rows(); ++r) {
            int par = 0;
            for (int c = 0; c < n; ++c) par ^= h.at(r, c) & b[static_cast<std::size_t>(c)];
            ok = ok && par == 0;
        }
        if (ok) out.insert(b);
    }
    return out;
}

} // namespace

TEST_CASE("alist round trip and ones count")
{
    const auto h = toy();
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 6);
    CHECK(h.ones() == 9);
    CHECK(h.at(0, 0));
    CHECK(h.at(2, 5));
    CHECK(!h.at(1, 0));
    CHECK(load_alist(to_alist(h)) == h);
    CHECK(to_alist(load_alist(to_alist(h))) == to_alist(h));
}

TEST_CASE("malformed alist reports a line number")
{
    try {
        load_alist("6 3\n2 x\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    // declared degrees disagree with the lists
    CHECK_THROWS_AS(load_alist("2 1\n1 2\n1 2\n1 1\n1\n1\n"), ParseError);
    CHECK_THROWS_AS(load_alist("6 3\n2 3\n2 2 2 1 1 1\n3 3 3\n1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n1 2 4\n2 3 5\n1 3 5\n"),
                    ParseError);
}

TEST_CASE("encoder: zero word, valid codewords, null-space equality")
{
    const auto h = toy();
    LdpcEncoder enc(h);
    CHECK(enc.dimension() == 3);
    const Bits zero(3, 0);
    CHECK(enc.encode(zero) == Bits(6, 0));

    std::set<Bits> words;
    for (int u = 0; u < 8; ++u) {
        const Bits info{static_cast<std::uint8_t>(u & 1), static_cast<std::uint8_t>((u >> 1) & 1),
                        static_cast<std::uint8_t>((u >> 2) & 1)};
        words.insert(enc.encode(info));
    }
    CHECK(words == null_space(h));
    CHECK_THROWS_AS((void)enc.encode(Bits(2, 0)), ShapeError);
}

TEST_CASE("encoder handles rank-deficient matrices by growing K")
{
    // third row is the sum of the first two
    const ParityCheckMatrix h(3, 5, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 2}, {0, 3}, {1, 4}, {2, 3}, {2, 4}});
    CHECK(h.rank() == 2);
    LdpcEncoder enc(h);
    CHECK(enc.rank_deficient());
    CHECK(enc.dimension() == 3);
    std::set<Bits> words;
    for (int u = 0; u < 8; ++u) {
        const Bits info{static_cast<std::uint8_t>(u & 1), static_cast<std::uint8_t>((u >> 1) & 1),
                        static_cast<std::uint8_t>((u >> 2) & 1)};
        words.insert(enc.encode(info));
    }
    CHECK(words == null_space(h));
}

TEST_CASE("generated IRA code: peeling encoder, no 4-cycles, 10^3 valid codewords")
{
    const auto h = generate_ira_code(132, 66, 3, 1);
    CHECK(h.rank() == 66);
    LdpcEncoder enc(h);
    CHECK(enc.uses_peeling());
    for (int a = 0; a < h.cols(); ++a) {
        for (int b = a + 1; b < h.cols(); ++b) {
            int shared = 0;
            for (int r : h.col_adjacency()[static_cast<std::size_t>(a)]) shared += h.at(r, b);
            CHECK(shared <= 1);
        }
    }
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const Bits u = random_bits(66, rng);
        const Bits c = enc.encode(u);
        CHECK(h.is_codeword(c));
        for (int j = 0; j < 66; ++j) CHECK(c[static_cast<std::size_t>(enc.info_positions()[static_cast<std::size_t>(j)])] == u[static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("syndrome zero iff codeword, on random words")
{
    const auto h = generate_ira_code(40, 20, 3, 2);
    const LdpcEncoder code(h);
    Rng rng(4);
    for (int t = 0; t < 1000; ++t) {
        Bits w = code.encode(random_bits(20, rng));
        const bool flip = t % 2 == 1;
        if (flip) w[static_cast<std::size_t>(t % 40)] ^= 1;
        const Bits s = h.syndrome(w);
        const bool zero = std::all_of(s.begin(), s.end(), [](auto v) { return v == 0; });
        CHECK(zero == !flip); // single flips of a codeword are never codewords (every column has weight ≥ 1)
        CHECK(h.is_codeword(w) == zero);
    }
}

TEST_CASE("boxplus equals exhaustive posterior of a single parity check")
{
    Rng rng(5);
    std::normal_distribution<double> d(0.0, 3.0);
    for (int t = 0; t < 100; ++t) {
        const double l1 = d(rng);
        const double l2 = d(rng);
        // P(b1 ⊕ b2 = 0) vs P(= 1) with P(b=0) = 1/(1+e^{−ℓ})
        const double p1 = 1.0 / (1.0 + std::exp(-l1));
        const double p2 = 1.0 / (1.0 + std::exp(-l2));
        const double even = p1 * p2 + (1 - p1) * (1 - p2);
        const double expect = std::log(even / (1 - even));
        const std::array<double, 2> in{l1, l2};
        CHECK(std::abs(boxplus(in) - expect) <= 1e-10);
    }
}

TEST_CASE("spa_decode: single parity check extrinsic and saturated codeword")
{
    const ParityCheckMatrix spc(1, 3, {{0, 0}, {0, 1}, {0, 2}});
    const LlrVector in({0.7, -1.3, 2.1}, LlrRole::total);
    const auto res = spa_decode(spc, in, 1, false);
    const std::array<double, 2> others{-1.3, 2.1};
    CHECK(res.extrinsic[0] == doctest::Approx(boxplus(others)).epsilon(1e-12));
    CHECK(res.posterior[0] == doctest::Approx(0.7 + boxplus(others)).epsilon(1e-12));

    const auto h = generate_ira_code(60, 30, 3, 7);
    Rng rng(8);
    const Bits c = LdpcEncoder(h).encode(random_bits(30, rng));
    LlrVector sat;
    for (auto b : c) sat.values.push_back(b ? -kLlrMax : kLlrMax);
    const auto r = spa_decode(h, sat, 20, true);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.hard_bits == c);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((r.posterior[i] > 0) == (c[i] == 0));
}

TEST_CASE("decoder codeword symmetry")
{
    const auto h = generate_ira_code(60, 30, 3, 9);
    Rng rng(10);
    const Bits c = LdpcEncoder(h).encode(random_bits(30, rng));
    std::normal_distribution<double> n(0.0, 1.5);
    LlrVector zero_word;
    for (std::size_t i = 0; i < c.size(); ++i) zero_word.values.push_back(2.0 + n(rng));
    LlrVector flipped = zero_word;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i]) flipped.values[i] = -flipped.values[i];
    }
    const auto a = spa_decode(h, zero_word, 30, false);
    const auto b = spa_decode(h, flipped, 30, false);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK((a.hard_bits[i] ^ c[i]) == b.hard_bits[i]);
}

TEST_CASE("zero syndrome is a fixed point under further iterations")
{
    const auto h = generate_ira_code(60, 30, 3, 11);
    Rng rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    LlrVector l;
    for (int i = 0; i < 60; ++i) l.values.push_back(3.0 + n(rng));
    const auto a = spa_decode(h, l, 50, true);
    REQUIRE(a.converged);
    const auto b = spa_decode(h, l, a.iterations + 5, false);
    CHECK(b.hard_bits == a.hard_bits);
    CHECK(h.is_codeword(b.hard_bits));
}

TEST_CASE("punctured columns start at zero and still receive information")
{
    auto h = generate_ira_code(40, 20, 3, 13);
    h.set_punctured({0, 1});
    CHECK(h.punctured_count() == 2);
    LlrVector l;
    for (int i = 0; i < 40; ++i) l.values.push_back(i < 2 ? -30.0 : 4.0); // bogus values on punctured bits are ignored
    const auto r = spa_decode(h, l, 10, false);
    CHECK(r.posterior[0] > 0.0);
    CHECK(r.posterior[1] > 0.0);
    CHECK(r.converged);
}

TEST_CASE("shipped codes load and have the advertised dimensions")
{
    struct Spec {
        const char* path;
        int n;
        int k;
    };
    for (const auto& s : {Spec{"data/codes/ira_132_66.alist", 132, 66}, Spec{"data/codes/ira_4608_4032.alist", 4608, 4032},
                          Spec{"data/codes/ira_25344_8448.alist", 25344, 8448}}) {
        REQUIRE(std::filesystem::exists(s.path));
        const auto h = load_alist_file(s.path);
        CHECK(h.cols() == s.n);
        CHECK(h.cols() - h.rows() == s.k);
        LdpcEncoder enc(h);
        CHECK(enc.uses_peeling());
        CHECK(enc.dimension() == s.k);
    }
}
