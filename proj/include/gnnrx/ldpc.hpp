#pragma once

// LDPC codes from alist parity-check matrices: GF(2) encoding and flooding
// belief-propagation decoding with exact (tanh) check updates.

#include "gnnrx/channel.hpp"
#include "gnnrx/llr.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gnnrx {

class ParityCheckMatrix {
public:
    ParityCheckMatrix() = default;
    /// From explicit (row, col) positions of the ones; duplicates are rejected.
    ParityCheckMatrix(int rows, int cols, const std::vector<std::pair<int, int>>& ones);

    [[nodiscard]] int rows() const { return rows_; }
    [[nodiscard]] int cols() const { return cols_; }
    [[nodiscard]] const std::vector<std::vector<int>>& row_adjacency() const { return row_adj_; }
    [[nodiscard]] const std::vector<std::vector<int>>& col_adjacency() const { return col_adj_; }
    [[nodiscard]] std::size_t ones() const;
    [[nodiscard]] bool at(int r, int c) const;

    [[nodiscard]] const std::vector<bool>& puncture_mask() const { return puncture_; }
    /// Columns transmitted as erasures; every index must be < cols().
    void set_punctured(const std::vector<int>& columns);
    [[nodiscard]] int punctured_count() const;

    /// GF(2) rank.
    [[nodiscard]] int rank() const;
    /// H·cᵀ over GF(2).
    [[nodiscard]] Bits syndrome(std::span<const std::uint8_t> word) const;
    [[nodiscard]] bool is_codeword(std::span<const std::uint8_t> word) const;

    friend bool operator==(const ParityCheckMatrix& a, const ParityCheckMatrix& b)
    {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_adj_ == b.row_adj_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::vector<int>> row_adj_;
    std::vector<std::vector<int>> col_adj_;
    std::vector<bool> puncture_;
};

/// MacKay alist text. Errors carry the offending line number.
ParityCheckMatrix load_alist(std::string_view text);
ParityCheckMatrix load_alist_file(const std::string& path);
std::string to_alist(const ParityCheckMatrix& pcm);

/// Systematic-where-possible encoder. Info bits occupy `info_positions()`;
/// K = n − rank(H).
class LdpcEncoder {
public:
    explicit LdpcEncoder(const ParityCheckMatrix& pcm);

    [[nodiscard]] int dimension() const { return static_cast<int>(info_pos_.size()); }
    [[nodiscard]] int length() const { return n_; }
    [[nodiscard]] const std::vector<int>& info_positions() const { return info_pos_; }
    /// True when the fast sparse (peeling) path is used instead of dense GF(2) elimination.
    [[nodiscard]] bool uses_peeling() const { return !peel_order_.empty(); }
    /// True when rank(H) < m and K was enlarged accordingly.
    [[nodiscard]] bool rank_deficient() const { return rank_deficient_; }

    [[nodiscard]] Bits encode(std::span<const std::uint8_t> info) const;

private:
    int n_ = 0;
    bool rank_deficient_ = false;
    std::vector<int> info_pos_;
    // peeling path: (check row, parity column) in solve order
    std::vector<std::pair<int, int>> peel_order_;
    std::vector<std::vector<int>> row_adj_;
    // dense path: parity column j = XOR of info bits listed in dense_rows_[j]
    std::vector<int> parity_pos_;
    std::vector<std::vector<std::uint64_t>> dense_rows_;
};

/// Convenience wrapper around LdpcEncoder.
Bits encode(const ParityCheckMatrix& pcm, std::span<const std::uint8_t> info);

struct DecodeResult {
    LlrVector posterior;  // role total
    LlrVector extrinsic;  // sum of check-to-variable messages, role extrinsic
    Bits hard_bits;
    bool converged = false;
    int iterations = 0;
};

/// Flooding sum-product decoding. Punctured positions are forced to zero input.
DecodeResult spa_decode(const ParityCheckMatrix& pcm, const LlrVector& channel_llrs, int max_iterations,
                        bool early_stop);

/// Repeat-accumulate style code: weight-`column_weight` systematic columns placed without
/// length-4 cycles on the first n − m columns, dual-diagonal parity part on the rest.
ParityCheckMatrix generate_ira_code(int n, int k, int column_weight, std::uint64_t seed);

/// 2·atanh(Π tanh(ℓ_k/2)), saturated.
double boxplus(std::span<const double> llrs);

} // namespace gnnrx
