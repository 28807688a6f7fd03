#include "gnnrx/errors.hpp"
#include "gnnrx/graphs.hpp"

#include <doctest.h>

#include <set>

using namespace gnnrx;

TEST_CASE("ffg: trivial and memory-2 degrees")
{
    const auto g1 = build_ffg(1, 0);
    CHECK(g1.num_fn == 1);
    CHECK(g1.num_vn == 1);
    CHECK(g1.edges.size() == 1);

    const auto g = build_ffg(10, 2);
    CHECK(g.num_fn == 12);
    CHECK(g.num_vn == 14);
    for (int f = 0; f < g.num_fn; ++f) CHECK(g.fn_degree(f) == 3);
    for (int v = 2; v < 12; ++v) CHECK(g.vn_degree(v) == 3);
    CHECK(g.max_edge_type(FnClass::detection) == 2);
    CHECK(g.num_edge_types == 3);
    CHECK(g.readout_vns.size() == 10);
    for (int v : g.readout_vns) CHECK(g.vn_kind[static_cast<std::size_t>(v)] == VnKind::payload);
}

TEST_CASE("ffg edges match an explicit enumeration")
{
    for (int L = 0; L <= 4; ++L) {
        const int n = 7;
        const auto g = build_ffg(n, L);
        std::set<std::tuple<int, int, int>> expect;
        for (int i = 0; i < n + L; ++i) {
            for (int l = 0; l <= L; ++l) expect.emplace(i + L - l, i, l); // x̃ index of x_{i−l}
        }
        std::set<std::tuple<int, int, int>> got;
        for (const auto& e : g.edges) got.emplace(e.vn, e.fn, e.type);
        CHECK(got == expect);
        // payload edges: observation i sees x_{i−l} only if 0 ≤ i−l < n
        int payload_edges = 0;
        for (const auto& e : g.edges) payload_edges += g.vn_kind[static_cast<std::size_t>(e.vn)] == VnKind::payload;
        CHECK(payload_edges == n * (L + 1));
    }
}

TEST_CASE("ufg: degrees, FN count, edge types")
{
    const auto g = build_ufg(10, 2);
    for (int f = 0; f < g.num_fn; ++f) CHECK(g.fn_degree(f) == 2);
    for (int v = 2; v < 8; ++v) CHECK(g.vn_degree(v) == 4);
    CHECK(g.max_edge_type(FnClass::detection) == 3);

    for (int L = 1; L <= 4; ++L) {
        for (int n = 1; n <= 9; ++n) {
            int expect = 0;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) expect += (j - i) <= L;
            }
            CHECK(build_ufg(n, L).num_fn == expect);
        }
    }
    CHECK(build_ufg(2, 1).num_fn == 1);
    const auto g0 = build_ufg(5, 0);
    CHECK(g0.num_fn == 0);
    CHECK(g0.memoryless_warning);

    // edge type encodes the signed offset to the partner
    for (int f = 0; f < g.num_fn; ++f) {
        const auto& a = g.edges[static_cast<std::size_t>(g.fn_edges[static_cast<std::size_t>(f)][0])];
        const auto& b = g.edges[static_cast<std::size_t>(g.fn_edges[static_cast<std::size_t>(f)][1])];
        CHECK(a.type == ufg_edge_type(b.vn - a.vn, 2));
        CHECK(b.type == ufg_edge_type(a.vn - b.vn, 2));
    }
}

TEST_CASE("tanner graph from a PCM")
{
    const ParityCheckMatrix spc(1, 3, {{0, 0}, {0, 1}, {0, 2}});
    const auto t = build_tanner(spc);
    CHECK(t.num_fn == 1);
    CHECK(t.fn_degree(0) == 3);
    CHECK(t.fn_class[0] == FnClass::check);

    const ParityCheckMatrix h(3, 6, {{0, 0}, {0, 1}, {0, 3}, {1, 1}, {1, 2}, {1, 4}, {2, 0}, {2, 4}, {2, 5}, {2, 2}});
    const auto g = build_tanner(h);
    CHECK(g.edges.size() == h.ones());
    for (int r = 0; r < 3; ++r) CHECK(g.fn_degree(r) == static_cast<int>(h.row_adjacency()[static_cast<std::size_t>(r)].size()));
    for (int c = 0; c < 6; ++c) {
        int col = 0;
        for (int r = 0; r < 3; ++r) col += h.at(r, c);
        CHECK(g.vn_degree(c) == col);
    }
    for (const auto& e : g.edges) CHECK(e.type == 0);

    const ParityCheckMatrix empty_col(1, 3, {{0, 0}, {0, 1}});
    CHECK_THROWS_AS(build_tanner(empty_col), std::invalid_argument);
}

TEST_CASE("interleaver is a bijection")
{
    const auto p = Interleaver::random(50, 3);
    std::vector<int> data(50);
    for (int i = 0; i < 50; ++i) data[static_cast<std::size_t>(i)] = i * 7;
    CHECK(p.deinterleave(p.interleave(data)) == data);
    for (int i = 0; i < 50; ++i) CHECK(p.inverse(p(i)) == i);
    CHECK(Interleaver::random(50, 3).permutation() == p.permutation());
    CHECK_THROWS(Interleaver(std::vector<int>{0, 0, 1}));
}

TEST_CASE("joint graph: degree additivity, connectivity, interleaver only moves check edges")
{
    const ParityCheckMatrix h(2, 4, {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {1, 3}});
    const auto det = build_ffg(4, 1);
    const auto tanner = build_tanner(h);
    const auto joint = build_joint(det, h, Interleaver::identity(4), 1);
    for (int c = 0; c < 4; ++c) {
        const int v = joint.readout_vns[static_cast<std::size_t>(c)];
        CHECK(joint.vn_degree(v) == det.vn_degree(v) + tanner.vn_degree(c));
    }
    CHECK(joint.is_connected());
    CHECK(joint.count_fn(FnClass::check) == 2);
    CHECK(joint.count_fn(FnClass::detection) == det.num_fn);

    const auto perm = build_joint(det, h, Interleaver(std::vector<int>{2, 0, 3, 1}), 1);
    std::set<std::tuple<int, int, int>> det_a;
    std::set<std::tuple<int, int, int>> det_b;
    for (const auto& e : joint.edges) {
        if (joint.fn_class[static_cast<std::size_t>(e.fn)] == FnClass::detection) det_a.emplace(e.vn, e.fn, e.type);
    }
    for (const auto& e : perm.edges) {
        if (perm.fn_class[static_cast<std::size_t>(e.fn)] == FnClass::detection) det_b.emplace(e.vn, e.fn, e.type);
    }
    CHECK(det_a == det_b);
    CHECK(perm.readout_vns[0] == det.readout_vns[2]);

    CHECK_THROWS_AS(build_joint(det, h, Interleaver::identity(4), 2), UnsupportedConfiguration);
}

TEST_CASE("joint graph with Proakis-C memory is connected and keeps virtual VNs out of readout")
{
    std::vector<std::pair<int, int>> ones;
    for (int r = 0; r < 6; ++r) {
        ones.emplace_back(r, r);
        ones.emplace_back(r, r + 6);
        ones.emplace_back(r, (r + 1) % 6 + 6);
    }
    const ParityCheckMatrix h(6, 12, ones);
    const auto joint = build_joint(build_ffg(12, 4), h, Interleaver::random(12, 1), 1);
    CHECK(joint.is_connected());
    for (int v : joint.readout_vns) CHECK(joint.vn_kind[static_cast<std::size_t>(v)] != VnKind::virtual_node);
}

TEST_CASE("punctured code bits get their own VNs")
{
    ParityCheckMatrix h(2, 5, {{0, 0}, {0, 1}, {0, 4}, {1, 2}, {1, 3}, {1, 4}});
    h.set_punctured({4});
    const auto det = build_ffg(4, 1);
    const auto joint = build_joint(det, h, Interleaver::identity(4), 1);
    CHECK(joint.num_vn == det.num_vn + 1);
    CHECK(joint.vn_kind.back() == VnKind::punctured);
    CHECK(joint.readout_vns.size() == 5);
    CHECK(joint.is_connected());
}

TEST_CASE("edge list export")
{
    const auto g = build_ffg(1, 0);
    CHECK(export_edge_list(g) == "0 0 0 detection\n");
}
