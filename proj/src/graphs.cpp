#include "gnnrx/graphs.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gnnrx {

void BipartiteGraph::finalize()
{
    if (static_cast<int>(fn_class.size()) != num_fn || static_cast<int>(vn_kind.size()) != num_vn) {
        throw ShapeError("graph: per-node tables do not match node counts");
    }
    vn_edges.assign(static_cast<std::size_t>(num_vn), {});
    fn_edges.assign(static_cast<std::size_t>(num_fn), {});
    std::set<std::pair<int, int>> seen;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& ed = edges[e];
        if (ed.vn < 0 || ed.vn >= num_vn || ed.fn < 0 || ed.fn >= num_fn) {
            throw ShapeError("graph: edge endpoint out of range");
        }
        if (ed.type < 0 || (fn_class[static_cast<std::size_t>(ed.fn)] == FnClass::detection && ed.type >= num_edge_types)) {
            throw ShapeError("graph: edge type out of range");
        }
        if (!seen.emplace(ed.vn, ed.fn).second) {
            throw ShapeError("graph: duplicate edge");
        }
        vn_edges[static_cast<std::size_t>(ed.vn)].push_back(static_cast<int>(e));
        fn_edges[static_cast<std::size_t>(ed.fn)].push_back(static_cast<int>(e));
    }
    for (int v : readout_vns) {
        if (v < 0 || v >= num_vn || vn_kind[static_cast<std::size_t>(v)] == VnKind::virtual_node) {
            throw ShapeError("graph: readout set contains a virtual or invalid VN");
        }
    }
}

int BipartiteGraph::count_fn(FnClass c) const
{
    return static_cast<int>(std::count(fn_class.begin(), fn_class.end(), c));
}

int BipartiteGraph::max_edge_type(FnClass c) const
{
    int m = -1;
    for (const auto& e : edges) {
        if (fn_class[static_cast<std::size_t>(e.fn)] == c) m = std::max(m, e.type);
    }
    return m;
}

bool BipartiteGraph::is_connected() const
{
    const int n = num_vn + num_fn;
    if (n == 0) return true;
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    int components = n;
    for (const auto& e : edges) {
        const int a = find(e.vn);
        const int b = find(num_vn + e.fn);
        if (a != b) {
            parent[static_cast<std::size_t>(a)] = b;
            --components;
        }
    }
    return components == 1;
}

BipartiteGraph build_ffg(int num_symbols, int memory)
{
    if (num_symbols < 1 || memory < 0) {
        throw std::invalid_argument("build_ffg: need N_x >= 1 and L >= 0");
    }
    BipartiteGraph g;
    const int L = memory;
    g.num_vn = num_symbols + 2 * L;
    g.num_fn = num_symbols + L;
    g.num_edge_types = L + 1;
    g.fn_class.assign(static_cast<std::size_t>(g.num_fn), FnClass::detection);
    g.vn_kind.assign(static_cast<std::size_t>(g.num_vn), VnKind::payload);
    for (int v = 0; v < L; ++v) {
        g.vn_kind[static_cast<std::size_t>(v)] = VnKind::virtual_node;
        g.vn_kind[static_cast<std::size_t>(g.num_vn - 1 - v)] = VnKind::virtual_node;
    }
    for (int i = 0; i < g.num_fn; ++i) {
        for (int l = 0; l <= L; ++l) {
            // y_i depends on x_{i−l} = x̃_{i−l+L}
            g.edges.push_back(Edge{i + L - l, i, l});
        }
    }
    for (int v = L; v < L + num_symbols; ++v) g.readout_vns.push_back(v);
    g.finalize();
    return g;
}

int ufg_edge_type(int signed_offset, int memory)
{
    if (signed_offset == 0 || std::abs(signed_offset) > memory) {
        throw std::invalid_argument("ufg_edge_type: offset out of range");
    }
    return signed_offset < 0 ? signed_offset + memory : signed_offset + memory - 1;
}

BipartiteGraph build_ufg(int num_symbols, int memory)
{
    if (num_symbols < 1 || memory < 0) {
        throw std::invalid_argument("build_ufg: need N_x >= 1 and L >= 0");
    }
    BipartiteGraph g;
    const int L = memory;
    g.num_vn = num_symbols;
    g.num_edge_types = std::max(1, 2 * L);
    g.vn_kind.assign(static_cast<std::size_t>(g.num_vn), VnKind::payload);
    for (int i = 0; i < num_symbols; ++i) {
        for (int j = i + 1; j <= std::min(num_symbols - 1, i + L); ++j) {
            const int f = g.num_fn++;
            g.edges.push_back(Edge{i, f, ufg_edge_type(j - i, L)});
            g.edges.push_back(Edge{j, f, ufg_edge_type(i - j, L)});
        }
    }
    g.fn_class.assign(static_cast<std::size_t>(g.num_fn), FnClass::detection);
    g.memoryless_warning = g.num_fn == 0;
    for (int v = 0; v < num_symbols; ++v) g.readout_vns.push_back(v);
    g.finalize();
    return g;
}

BipartiteGraph build_tanner(const ParityCheckMatrix& pcm)
{
    if (pcm.rows() < 1 || pcm.cols() < 1) {
        throw std::invalid_argument("build_tanner: empty parity-check matrix");
    }
    for (int r = 0; r < pcm.rows(); ++r) {
        if (pcm.row_adjacency()[static_cast<std::size_t>(r)].empty()) {
            throw std::invalid_argument("build_tanner: empty row " + std::to_string(r));
        }
    }
    for (int c = 0; c < pcm.cols(); ++c) {
        if (pcm.col_adjacency()[static_cast<std::size_t>(c)].empty()) {
            throw std::invalid_argument("build_tanner: empty column " + std::to_string(c));
        }
    }
    BipartiteGraph g;
    g.num_vn = pcm.cols();
    g.num_fn = pcm.rows();
    g.num_edge_types = 1;
    g.fn_class.assign(static_cast<std::size_t>(g.num_fn), FnClass::check);
    g.vn_kind.assign(static_cast<std::size_t>(g.num_vn), VnKind::payload);
    for (int c = 0; c < pcm.cols(); ++c) {
        if (pcm.puncture_mask()[static_cast<std::size_t>(c)]) g.vn_kind[static_cast<std::size_t>(c)] = VnKind::punctured;
        g.readout_vns.push_back(c);
    }
    for (int r = 0; r < pcm.rows(); ++r) {
        for (int c : pcm.row_adjacency()[static_cast<std::size_t>(r)]) {
            g.edges.push_back(Edge{c, r, 0});
        }
    }
    g.finalize();
    return g;
}

Interleaver::Interleaver(std::vector<int> permutation) : perm_(std::move(permutation)), inv_(perm_.size(), -1)
{
    for (std::size_t j = 0; j < perm_.size(); ++j) {
        const int k = perm_[j];
        if (k < 0 || k >= static_cast<int>(perm_.size()) || inv_[static_cast<std::size_t>(k)] != -1) {
            throw std::invalid_argument("interleaver: not a permutation");
        }
        inv_[static_cast<std::size_t>(k)] = static_cast<int>(j);
    }
}

Interleaver Interleaver::identity(int n)
{
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    return Interleaver(std::move(p));
}

Interleaver Interleaver::random(int n, std::uint64_t seed)
{
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher–Yates with an explicit draw so the permutation does not depend on the library's shuffle.
    for (std::size_t i = p.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(p[i - 1], p[pick(rng)]);
    }
    return Interleaver(std::move(p));
}

BipartiteGraph build_joint(const BipartiteGraph& detection, const ParityCheckMatrix& pcm,
                           const Interleaver& interleaver, int bits_per_symbol)
{
    if (bits_per_symbol != 1) {
        throw UnsupportedConfiguration("joint detection/decoding graphs require BPSK (M = 2)");
    }
    const int n = pcm.cols();
    const int transmitted = n - pcm.punctured_count();
    const auto payload = static_cast<int>(detection.readout_vns.size());
    if (payload != transmitted) {
        throw ShapeError("build_joint: detector has " + std::to_string(payload) + " payload VNs but the code sends " +
                         std::to_string(transmitted) + " bits");
    }
    if (interleaver.size() != transmitted) {
        throw ShapeError("build_joint: interleaver length differs from transmitted bit count");
    }
    BipartiteGraph g = detection;
    g.readout_vns.clear();
    std::vector<int> bit_vn(static_cast<std::size_t>(n));
    int t = 0;
    for (int c = 0; c < n; ++c) {
        if (pcm.puncture_mask()[static_cast<std::size_t>(c)]) {
            bit_vn[static_cast<std::size_t>(c)] = g.num_vn++;
            g.vn_kind.push_back(VnKind::punctured);
        } else {
            bit_vn[static_cast<std::size_t>(c)] = detection.readout_vns[static_cast<std::size_t>(interleaver(t++))];
        }
    }
    const int fn_offset = g.num_fn;
    g.num_fn += pcm.rows();
    g.fn_class.resize(static_cast<std::size_t>(g.num_fn), FnClass::check);
    for (int r = 0; r < pcm.rows(); ++r) {
        for (int c : pcm.row_adjacency()[static_cast<std::size_t>(r)]) {
            g.edges.push_back(Edge{bit_vn[static_cast<std::size_t>(c)], fn_offset + r, 0});
        }
    }
    g.readout_vns = bit_vn;
    g.finalize();
    return g;
}

std::string export_edge_list(const BipartiteGraph& g)
{
    std::ostringstream os;
    for (const auto& e : g.edges) {
        os << e.vn << ' ' << e.fn << ' ' << e.type << ' '
           << (g.fn_class[static_cast<std::size_t>(e.fn)] == FnClass::detection ? "detection" : "check") << '\n';
    }
    return os.str();
}

} // namespace gnnrx
