#include "gnnrx/ldpc.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gnnrx {

ParityCheckMatrix::ParityCheckMatrix(int rows, int cols, const std::vector<std::pair<int, int>>& ones)
    : rows_(rows), cols_(cols), row_adj_(static_cast<std::size_t>(rows)), col_adj_(static_cast<std::size_t>(cols)),
      puncture_(static_cast<std::size_t>(cols), false)
{
    if (rows < 1 || cols < 1) {
        throw ShapeError("parity-check matrix must be non-empty");
    }
    for (auto [r, c] : ones) {
        if (r < 0 || r >= rows || c < 0 || c >= cols) {
            throw ShapeError("parity-check entry (" + std::to_string(r) + "," + std::to_string(c) + ") out of range");
        }
        row_adj_[static_cast<std::size_t>(r)].push_back(c);
        col_adj_[static_cast<std::size_t>(c)].push_back(r);
    }
    for (auto& v : row_adj_) {
        std::sort(v.begin(), v.end());
        if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
            throw ShapeError("duplicate entry in parity-check matrix");
        }
    }
    for (auto& v : col_adj_) {
        std::sort(v.begin(), v.end());
    }
}

std::size_t ParityCheckMatrix::ones() const
{
    std::size_t n = 0;
    for (const auto& r : row_adj_) {
        n += r.size();
    }
    return n;
}

bool ParityCheckMatrix::at(int r, int c) const
{
    const auto& row = row_adj_.at(static_cast<std::size_t>(r));
    return std::binary_search(row.begin(), row.end(), c);
}

void ParityCheckMatrix::set_punctured(const std::vector<int>& columns)
{
    puncture_.assign(static_cast<std::size_t>(cols_), false);
    for (int c : columns) {
        if (c < 0 || c >= cols_) {
            throw ShapeError("puncture column " + std::to_string(c) + " out of range");
        }
        puncture_[static_cast<std::size_t>(c)] = true;
    }
}

int ParityCheckMatrix::punctured_count() const
{
    return static_cast<int>(std::count(puncture_.begin(), puncture_.end(), true));
}

namespace {

using Word = std::uint64_t;

std::vector<std::vector<Word>> packed_rows(const ParityCheckMatrix& pcm)
{
    const std::size_t words = (static_cast<std::size_t>(pcm.cols()) + 63) / 64;
    std::vector<std::vector<Word>> rows(static_cast<std::size_t>(pcm.rows()), std::vector<Word>(words, 0));
    for (int r = 0; r < pcm.rows(); ++r) {
        for (int c : pcm.row_adjacency()[static_cast<std::size_t>(r)]) {
            rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c) / 64] |= Word{1} << (c % 64);
        }
    }
    return rows;
}

bool test_bit(const std::vector<Word>& row, int c)
{
    return (row[static_cast<std::size_t>(c) / 64] >> (c % 64)) & 1u;
}

/// Reduced row echelon form scanning pivot columns from the last column backwards.
/// Returns pivot column per reduced row (rows beyond rank are dropped).
std::vector<int> rref(std::vector<std::vector<Word>>& rows, int cols)
{
    std::vector<int> pivots;
    std::size_t rank = 0;
    for (int c = cols - 1; c >= 0 && rank < rows.size(); --c) {
        std::size_t sel = rank;
        while (sel < rows.size() && !test_bit(rows[sel], c)) {
            ++sel;
        }
        if (sel == rows.size()) {
            continue;
        }
        std::swap(rows[sel], rows[rank]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r != rank && test_bit(rows[r], c)) {
                for (std::size_t w = 0; w < rows[r].size(); ++w) {
                    rows[r][w] ^= rows[rank][w];
                }
            }
        }
        pivots.push_back(c);
        ++rank;
    }
    rows.resize(rank);
    return pivots;
}

} // namespace

int ParityCheckMatrix::rank() const
{
    auto rows = packed_rows(*this);
    return static_cast<int>(rref(rows, cols_).size());
}

Bits ParityCheckMatrix::syndrome(std::span<const std::uint8_t> word) const
{
    if (word.size() != static_cast<std::size_t>(cols_)) {
        throw ShapeError("syndrome: word length differs from code length");
    }
    Bits s(static_cast<std::size_t>(rows_), 0);
    for (int r = 0; r < rows_; ++r) {
        std::uint8_t acc = 0;
        for (int c : row_adj_[static_cast<std::size_t>(r)]) {
            acc ^= word[static_cast<std::size_t>(c)] & 1u;
        }
        s[static_cast<std::size_t>(r)] = acc;
    }
    return s;
}

bool ParityCheckMatrix::is_codeword(std::span<const std::uint8_t> word) const
{
    const Bits s = syndrome(word);
    return std::all_of(s.begin(), s.end(), [](std::uint8_t b) { return b == 0; });
}

ParityCheckMatrix load_alist(std::string_view text)
{
    std::vector<std::vector<long>> lines;
    std::vector<int> line_no;
    {
        std::istringstream in{std::string(text)};
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            std::istringstream ls(line);
            std::vector<long> vals;
            std::string tok;
            while (ls >> tok) {
                try {
                    std::size_t used = 0;
                    long v = std::stol(tok, &used);
                    if (used != tok.size()) throw std::invalid_argument(tok);
                    vals.push_back(v);
                } catch (const std::exception&) {
                    throw ParseError("non-integer token '" + tok + "'", no);
                }
            }
            if (!vals.empty()) {
                lines.push_back(std::move(vals));
                line_no.push_back(no);
            }
        }
    }
    std::size_t li = 0;
    auto next = [&](std::size_t min_count, const char* what) -> const std::vector<long>& {
        if (li >= lines.size()) {
            throw ParseError(std::string("unexpected end of input, expected ") + what,
                             line_no.empty() ? 0 : line_no.back() + 1);
        }
        if (lines[li].size() < min_count) {
            throw ParseError(std::string("too few values for ") + what, line_no[li]);
        }
        return lines[li++];
    };

    const auto& dims = next(2, "dimensions");
    const long n = dims[0];
    const long m = dims[1];
    if (n < 1 || m < 1 || dims.size() != 2) {
        throw ParseError("invalid dimensions header", line_no[li - 1]);
    }
    const auto& maxdeg = next(2, "maximum degrees");
    if (maxdeg.size() != 2 || maxdeg[0] < 1 || maxdeg[1] < 1) {
        throw ParseError("invalid maximum degree header", line_no[li - 1]);
    }
    const auto& col_deg = next(static_cast<std::size_t>(n), "column degrees");
    if (col_deg.size() != static_cast<std::size_t>(n)) {
        throw ParseError("column degree list has " + std::to_string(col_deg.size()) + " entries, expected " +
                             std::to_string(n),
                         line_no[li - 1]);
    }
    const int col_deg_line = line_no[li - 1];
    const auto& row_deg = next(static_cast<std::size_t>(m), "row degrees");
    if (row_deg.size() != static_cast<std::size_t>(m)) {
        throw ParseError("row degree list has " + std::to_string(row_deg.size()) + " entries, expected " +
                             std::to_string(m),
                         line_no[li - 1]);
    }
    const int row_deg_line = line_no[li - 1];
    long sum_c = 0;
    long sum_r = 0;
    for (long d : col_deg) {
        if (d < 0 || d > maxdeg[0]) throw ParseError("column degree exceeds declared maximum", col_deg_line);
        sum_c += d;
    }
    for (long d : row_deg) {
        if (d < 0 || d > maxdeg[1]) throw ParseError("row degree exceeds declared maximum", row_deg_line);
        sum_r += d;
    }
    if (sum_c != sum_r) {
        throw ParseError("column and row degree sums differ (" + std::to_string(sum_c) + " vs " +
                             std::to_string(sum_r) + ")",
                         row_deg_line);
    }

    std::vector<std::pair<int, int>> ones;
    for (long c = 0; c < n; ++c) {
        const auto d = static_cast<std::size_t>(col_deg[static_cast<std::size_t>(c)]);
        if (d == 0) {
            // an empty column may be written as a single 0 or omitted entirely
            if (li < lines.size() && lines[li].size() >= 1 &&
                std::all_of(lines[li].begin(), lines[li].end(), [](long v) { return v == 0; })) {
                ++li;
            }
            continue;
        }
        const auto& entries = next(d, "column entries");
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const long r = entries[k];
            if (k < d) {
                if (r < 1 || r > m) throw ParseError("row index out of range", line_no[li - 1]);
                ones.emplace_back(static_cast<int>(r - 1), static_cast<int>(c));
            } else if (r != 0) {
                throw ParseError("more entries than the declared column degree", line_no[li - 1]);
            }
        }
    }
    std::vector<std::pair<int, int>> row_ones;
    for (long r = 0; r < m; ++r) {
        const auto d = static_cast<std::size_t>(row_deg[static_cast<std::size_t>(r)]);
        if (d == 0) {
            if (li < lines.size() && std::all_of(lines[li].begin(), lines[li].end(), [](long v) { return v == 0; })) {
                ++li;
            }
            continue;
        }
        const auto& entries = next(d, "row entries");
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const long c = entries[k];
            if (k < d) {
                if (c < 1 || c > n) throw ParseError("column index out of range", line_no[li - 1]);
                row_ones.emplace_back(static_cast<int>(r), static_cast<int>(c - 1));
            } else if (c != 0) {
                throw ParseError("more entries than the declared row degree", line_no[li - 1]);
            }
        }
    }
    auto a = ones;
    auto b = row_ones;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) {
        throw ParseError("row lists are inconsistent with column lists", li > 0 ? line_no[li - 1] : 0);
    }
    try {
        return ParityCheckMatrix(static_cast<int>(m), static_cast<int>(n), ones);
    } catch (const ShapeError& e) {
        throw ParseError(e.what(), 0);
    }
}

ParityCheckMatrix load_alist_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open alist file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return load_alist(ss.str());
}

std::string to_alist(const ParityCheckMatrix& pcm)
{
    std::ostringstream os;
    std::size_t max_c = 0;
    std::size_t max_r = 0;
    for (const auto& c : pcm.col_adjacency()) max_c = std::max(max_c, c.size());
    for (const auto& r : pcm.row_adjacency()) max_r = std::max(max_r, r.size());
    os << pcm.cols() << ' ' << pcm.rows() << '\n' << max_c << ' ' << max_r << '\n';
    auto write_list = [&](const auto& adj) {
        for (std::size_t i = 0; i < adj.size(); ++i) {
            os << (i ? " " : "") << adj[i].size();
        }
        os << '\n';
    };
    write_list(pcm.col_adjacency());
    write_list(pcm.row_adjacency());
    auto write_entries = [&](const auto& adj, std::size_t width) {
        for (const auto& v : adj) {
            for (std::size_t k = 0; k < width; ++k) {
                os << (k ? " " : "") << (k < v.size() ? v[k] + 1 : 0);
            }
            os << '\n';
        }
    };
    write_entries(pcm.col_adjacency(), max_c);
    write_entries(pcm.row_adjacency(), max_r);
    return os.str();
}

LdpcEncoder::LdpcEncoder(const ParityCheckMatrix& pcm) : n_(pcm.cols()), row_adj_(pcm.row_adjacency())
{
    const int m = pcm.rows();
    const int k_guess = n_ - m;

    // Sparse path: info bits on the first n − m columns, then resolve checks with a single unknown.
    if (k_guess >= 0) {
        std::vector<bool> known(static_cast<std::size_t>(n_), false);
        for (int c = 0; c < k_guess; ++c) known[static_cast<std::size_t>(c)] = true;
        std::vector<int> unknown_count(static_cast<std::size_t>(m), 0);
        for (int r = 0; r < m; ++r) {
            for (int c : row_adj_[static_cast<std::size_t>(r)]) {
                if (!known[static_cast<std::size_t>(c)]) ++unknown_count[static_cast<std::size_t>(r)];
            }
        }
        std::deque<int> ready;
        for (int r = 0; r < m; ++r) {
            if (unknown_count[static_cast<std::size_t>(r)] == 1) ready.push_back(r);
        }
        std::vector<bool> used(static_cast<std::size_t>(m), false);
        std::vector<std::pair<int, int>> order;
        while (!ready.empty()) {
            const int r = ready.front();
            ready.pop_front();
            if (used[static_cast<std::size_t>(r)] || unknown_count[static_cast<std::size_t>(r)] != 1) continue;
            int col = -1;
            for (int c : row_adj_[static_cast<std::size_t>(r)]) {
                if (!known[static_cast<std::size_t>(c)]) col = c;
            }
            used[static_cast<std::size_t>(r)] = true;
            known[static_cast<std::size_t>(col)] = true;
            order.emplace_back(r, col);
            for (int r2 : pcm.col_adjacency()[static_cast<std::size_t>(col)]) {
                if (--unknown_count[static_cast<std::size_t>(r2)] == 1 && !used[static_cast<std::size_t>(r2)]) {
                    ready.push_back(r2);
                }
            }
        }
        if (static_cast<int>(order.size()) == m) {
            peel_order_ = std::move(order);
            for (int c = 0; c < k_guess; ++c) info_pos_.push_back(c);
            return;
        }
    }

    // Dense path: RREF with pivots taken from the right so that info bits sit on the left where possible.
    auto rows = packed_rows(pcm);
    const std::vector<int> pivots = rref(rows, n_);
    rank_deficient_ = static_cast<int>(pivots.size()) < m;
    std::vector<bool> is_pivot(static_cast<std::size_t>(n_), false);
    for (int p : pivots) is_pivot[static_cast<std::size_t>(p)] = true;
    for (int c = 0; c < n_; ++c) {
        if (!is_pivot[static_cast<std::size_t>(c)]) info_pos_.push_back(c);
    }
    const std::size_t kw = (info_pos_.size() + 63) / 64;
    parity_pos_ = pivots;
    dense_rows_.assign(pivots.size(), std::vector<Word>(kw, 0));
    for (std::size_t i = 0; i < pivots.size(); ++i) {
        for (std::size_t j = 0; j < info_pos_.size(); ++j) {
            if (test_bit(rows[i], info_pos_[j])) {
                dense_rows_[i][j / 64] |= Word{1} << (j % 64);
            }
        }
    }
}

Bits LdpcEncoder::encode(std::span<const std::uint8_t> info) const
{
    if (info.size() != info_pos_.size()) {
        throw ShapeError("encode: expected " + std::to_string(info_pos_.size()) + " info bits, got " +
                         std::to_string(info.size()));
    }
    Bits c(static_cast<std::size_t>(n_), 0);
    for (std::size_t j = 0; j < info.size(); ++j) {
        c[static_cast<std::size_t>(info_pos_[j])] = info[j] & 1u;
    }
    if (!peel_order_.empty()) {
        for (auto [r, col] : peel_order_) {
            std::uint8_t acc = 0;
            for (int c2 : row_adj_[static_cast<std::size_t>(r)]) {
                if (c2 != col) acc ^= c[static_cast<std::size_t>(c2)];
            }
            c[static_cast<std::size_t>(col)] = acc;
        }
        return c;
    }
    std::vector<Word> packed((info.size() + 63) / 64, 0);
    for (std::size_t j = 0; j < info.size(); ++j) {
        if (info[j] & 1u) packed[j / 64] |= Word{1} << (j % 64);
    }
    for (std::size_t i = 0; i < parity_pos_.size(); ++i) {
        int par = 0;
        for (std::size_t w = 0; w < packed.size(); ++w) {
            par ^= std::popcount(packed[w] & dense_rows_[i][w]) & 1;
        }
        c[static_cast<std::size_t>(parity_pos_[i])] = static_cast<std::uint8_t>(par);
    }
    return c;
}

Bits encode(const ParityCheckMatrix& pcm, std::span<const std::uint8_t> info)
{
    return LdpcEncoder(pcm).encode(info);
}

namespace {
constexpr double kTanhLimit = 1.0 - 1e-15;

double atanh2(double p)
{
    p = std::clamp(p, -kTanhLimit, kTanhLimit);
    return saturate(2.0 * std::atanh(p));
}
} // namespace

double boxplus(std::span<const double> llrs)
{
    double p = 1.0;
    for (double l : llrs) {
        p *= std::tanh(l / 2.0);
    }
    return atanh2(p);
}

DecodeResult spa_decode(const ParityCheckMatrix& pcm, const LlrVector& channel_llrs, int max_iterations,
                        bool early_stop)
{
    const int n = pcm.cols();
    const int m = pcm.rows();
    if (channel_llrs.size() != static_cast<std::size_t>(n)) {
        throw ShapeError("spa_decode: LLR length differs from code length");
    }
    // edge storage in row order
    std::vector<int> edge_col;
    std::vector<std::size_t> row_start(static_cast<std::size_t>(m) + 1, 0);
    for (int r = 0; r < m; ++r) {
        for (int c : pcm.row_adjacency()[static_cast<std::size_t>(r)]) edge_col.push_back(c);
        row_start[static_cast<std::size_t>(r) + 1] = edge_col.size();
    }
    const std::size_t E = edge_col.size();
    std::vector<double> input(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        input[static_cast<std::size_t>(c)] =
            pcm.puncture_mask()[static_cast<std::size_t>(c)] ? 0.0 : channel_llrs[static_cast<std::size_t>(c)];
    }
    std::vector<double> v2c(E);
    std::vector<double> c2v(E, 0.0);
    for (std::size_t e = 0; e < E; ++e) v2c[e] = input[static_cast<std::size_t>(edge_col[e])];

    std::vector<double> sum(static_cast<std::size_t>(n));
    std::vector<double> t;
    std::vector<double> prefix;
    DecodeResult res;
    res.hard_bits.assign(static_cast<std::size_t>(n), 0);
    for (int it = 1; it <= std::max(1, max_iterations); ++it) {
        for (int r = 0; r < m; ++r) {
            const std::size_t b = row_start[static_cast<std::size_t>(r)];
            const std::size_t d = row_start[static_cast<std::size_t>(r) + 1] - b;
            t.resize(d);
            prefix.resize(d + 1);
            for (std::size_t k = 0; k < d; ++k) t[k] = std::tanh(v2c[b + k] / 2.0);
            prefix[0] = 1.0;
            for (std::size_t k = 0; k < d; ++k) prefix[k + 1] = prefix[k] * t[k];
            double suffix = 1.0;
            for (std::size_t k = d; k-- > 0;) {
                c2v[b + k] = atanh2(prefix[k] * suffix);
                suffix *= t[k];
            }
        }
        sum = input;
        for (std::size_t e = 0; e < E; ++e) sum[static_cast<std::size_t>(edge_col[e])] += c2v[e];
        for (std::size_t e = 0; e < E; ++e) v2c[e] = saturate(sum[static_cast<std::size_t>(edge_col[e])] - c2v[e]);
        for (int c = 0; c < n; ++c) res.hard_bits[static_cast<std::size_t>(c)] = sum[static_cast<std::size_t>(c)] < 0.0;
        res.iterations = it;
        res.converged = pcm.is_codeword(res.hard_bits);
        if (early_stop && res.converged) break;
    }
    res.posterior.role = LlrRole::total;
    res.extrinsic.role = LlrRole::extrinsic;
    res.posterior.values.resize(static_cast<std::size_t>(n));
    res.extrinsic.values.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t e = 0; e < E; ++e) res.extrinsic.values[static_cast<std::size_t>(edge_col[e])] += c2v[e];
    for (int c = 0; c < n; ++c) {
        res.posterior.values[static_cast<std::size_t>(c)] = saturate(sum[static_cast<std::size_t>(c)]);
        res.extrinsic.values[static_cast<std::size_t>(c)] = saturate(res.extrinsic.values[static_cast<std::size_t>(c)]);
    }
    return res;
}

} // namespace gnnrx

namespace gnnrx {

ParityCheckMatrix generate_ira_code(int n, int k, int column_weight, std::uint64_t seed)
{
    const int m = n - k;
    if (k < 1 || m < 2 || column_weight < 2 || column_weight > m) {
        throw std::invalid_argument("generate_ira_code: invalid (n, k, weight)");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> ones;
    std::vector<int> row_deg(static_cast<std::size_t>(m), 0);
    std::set<std::pair<int, int>> pairs;
    for (int j = 0; j < m; ++j) {
        ones.emplace_back(j, k + j);
        ++row_deg[static_cast<std::size_t>(j)];
        if (j + 1 < m) {
            ones.emplace_back(j + 1, k + j);
            ++row_deg[static_cast<std::size_t>(j) + 1];
            pairs.emplace(j, j + 1);
        }
    }
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int c = 0; c < k; ++c) {
        std::vector<int> chosen;
        for (int attempt = 0; attempt < 200 && static_cast<int>(chosen.size()) < column_weight; ++attempt) {
            chosen.clear();
            // least-loaded rows first, random tie-break
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return row_deg[static_cast<std::size_t>(a)] < row_deg[static_cast<std::size_t>(b)];
            });
            const std::size_t window = std::min<std::size_t>(order.size(), static_cast<std::size_t>(column_weight) * 4 + attempt);
            std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(window), rng);
            for (int r : order) {
                bool ok = true;
                for (int q : chosen) {
                    if (pairs.contains({std::min(q, r), std::max(q, r)})) ok = false;
                }
                if (ok) chosen.push_back(r);
                if (static_cast<int>(chosen.size()) == column_weight) break;
            }
        }
        if (static_cast<int>(chosen.size()) < column_weight) {
            throw std::runtime_error("generate_ira_code: could not place column " + std::to_string(c) +
                                     " without a length-4 cycle");
        }
        for (std::size_t a = 0; a < chosen.size(); ++a) {
            ones.emplace_back(chosen[a], c);
            ++row_deg[static_cast<std::size_t>(chosen[a])];
            for (std::size_t b = a + 1; b < chosen.size(); ++b) {
                pairs.emplace(std::min(chosen[a], chosen[b]), std::max(chosen[a], chosen[b]));
            }
        }
    }
    return ParityCheckMatrix(m, n, ones);
}

} // namespace gnnrx
