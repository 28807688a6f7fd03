#pragma once

// Bipartite factor graphs used by the message-passing detectors and the GNN:
// Forney (FFG), Ungerboeck (UFG), Tanner and the joint detection/decoding graph.

#include "gnnrx/channel.hpp"
#include "gnnrx/ldpc.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gnnrx {

enum class FnClass : std::uint8_t { detection = 0, check = 1 };
enum class VnKind : std::uint8_t { payload, virtual_node, punctured };

struct Edge {
    int vn = 0;
    int fn = 0;
    int type = 0;
};

class BipartiteGraph {
public:
    int num_vn = 0;
    int num_fn = 0;
    std::vector<Edge> edges;
    std::vector<FnClass> fn_class;
    std::vector<VnKind> vn_kind;
    /// N_p for detection edges; check edges always carry type 0 and a zero attribute.
    int num_edge_types = 1;
    /// Set when a detection graph has no factor nodes (UFG with L = 0).
    bool memoryless_warning = false;
    /// VNs whose states are read out, in output order (payload symbols, or code bits for joint graphs).
    std::vector<int> readout_vns;

    /// Edge indices incident to each node, in ascending edge order.
    std::vector<std::vector<int>> vn_edges;
    std::vector<std::vector<int>> fn_edges;

    /// Builds the neighbourhood lists and validates indices and uniqueness. Throws ShapeError.
    void finalize();

    [[nodiscard]] int vn_degree(int v) const { return static_cast<int>(vn_edges[static_cast<std::size_t>(v)].size()); }
    [[nodiscard]] int fn_degree(int f) const { return static_cast<int>(fn_edges[static_cast<std::size_t>(f)].size()); }
    [[nodiscard]] int count_fn(FnClass c) const;
    [[nodiscard]] int max_edge_type(FnClass c) const;
    /// Union-find connectivity over all nodes.
    [[nodiscard]] bool is_connected() const;
};

enum class DetectionGraphKind { ffg, ufg };

/// One FN per observation y_i connected to x̃_{i..i+L}; the first and last L VNs are virtual.
/// Edge type is the tap index l, N_p = L + 1.
BipartiteGraph build_ffg(int num_symbols, int memory);

/// Pairwise FNs I_{i,j}, 0 < |i−j| ≤ L over the N_x payload VNs. Edge type encodes the signed
/// offset from the VN to its partner: offsets −L..−1, 1..L map to 0..2L−1.
BipartiteGraph build_ufg(int num_symbols, int memory);

/// Signed offset (partner − self) ↦ UFG edge type.
int ufg_edge_type(int signed_offset, int memory);

/// One check FN per row. Throws std::invalid_argument for empty rows or columns.
BipartiteGraph build_tanner(const ParityCheckMatrix& pcm);

class Interleaver {
public:
    Interleaver() = default;
    explicit Interleaver(std::vector<int> permutation);
    static Interleaver identity(int n);
    static Interleaver random(int n, std::uint64_t seed);

    [[nodiscard]] int size() const { return static_cast<int>(perm_.size()); }
    /// Position of input element j after interleaving.
    [[nodiscard]] int operator()(int j) const { return perm_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] int inverse(int k) const { return inv_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] const std::vector<int>& permutation() const { return perm_; }

    template <typename T>
    [[nodiscard]] std::vector<T> interleave(const std::vector<T>& in) const
    {
        std::vector<T> out(in.size());
        for (std::size_t j = 0; j < in.size(); ++j) out[static_cast<std::size_t>(perm_[j])] = in[j];
        return out;
    }
    template <typename T>
    [[nodiscard]] std::vector<T> deinterleave(const std::vector<T>& in) const
    {
        std::vector<T> out(in.size());
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[static_cast<std::size_t>(perm_[j])];
        return out;
    }

private:
    std::vector<int> perm_;
    std::vector<int> inv_;
};

/// Joint detection/decoding graph (BPSK only). The i-th transmitted (non-punctured) code bit
/// attaches to detector payload VN π(i); punctured code bits get their own VNs with check edges
/// only. readout_vns lists the VN of every code bit in code order.
BipartiteGraph build_joint(const BipartiteGraph& detection, const ParityCheckMatrix& pcm,
                           const Interleaver& interleaver, int bits_per_symbol);

/// "vn fn type class" per line.
std::string export_edge_list(const BipartiteGraph& g);

} // namespace gnnrx
