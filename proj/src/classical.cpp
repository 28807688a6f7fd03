#include "gnnrx/classical.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnnrx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNoiseFloor = 1e-12;

long long ipow(long long base, int exp)
{
    long long r = 1;
    for (int k = 0; k < exp; ++k) {
        if (r > std::numeric_limits<long long>::max() / base) {
            return std::numeric_limits<long long>::max();
        }
        r *= base;
    }
    return r;
}

void accumulate_max_star(double& acc, double v)
{
    acc = max_star(acc, v);
}

} // namespace

int Trellis::digit(long long state, int k) const
{
    for (int j = 0; j < k; ++j) state /= order;
    return static_cast<int>(state % order);
}

Trellis build_trellis(const Cir& cir, const Constellation& c, long long transition_budget)
{
    Trellis t;
    t.order = c.order();
    t.memory = cir.memory();
    const long long transitions = ipow(t.order, t.memory + 1);
    if (transitions > transition_budget) {
        throw BudgetExceeded("trellis needs " + std::to_string(transitions) + " transitions per stage (budget " +
                             std::to_string(transition_budget) + ")");
    }
    t.num_states = ipow(t.order, t.memory);
    t.transitions.reserve(static_cast<std::size_t>(transitions));
    for (long long s = 0; s < t.num_states; ++s) {
        for (int a = 0; a < t.order; ++a) {
            Trellis::Transition tr{};
            tr.prev_state = s;
            tr.input = a;
            tr.next_state = t.memory == 0 ? 0 : (s * t.order) % t.num_states + a;
            Complex out = cir.taps[0] * c.point(a);
            for (int k = 0; k < t.memory; ++k) {
                out += cir.taps[static_cast<std::size_t>(k + 1)] * c.point(t.digit(s, k));
            }
            tr.output = out;
            t.transitions.push_back(tr);
        }
    }
    return t;
}

std::vector<std::vector<double>> symbol_log_priors(const LlrVector& bit_llrs, const Constellation& c,
                                                   std::size_t num_symbols)
{
    const auto k = static_cast<std::size_t>(c.bits_per_symbol());
    if (bit_llrs.size() != num_symbols * k) {
        throw ShapeError("prior LLR length " + std::to_string(bit_llrs.size()) + " does not match " +
                         std::to_string(num_symbols * k) + " bits");
    }
    std::vector<std::vector<double>> lp(num_symbols, std::vector<double>(static_cast<std::size_t>(c.order()), 0.0));
    for (std::size_t i = 0; i < num_symbols; ++i) {
        for (int s = 0; s < c.order(); ++s) {
            double acc = 0.0;
            for (std::size_t b = 0; b < k; ++b) {
                acc += (1 - 2 * c.bit(s, static_cast<int>(b))) * bit_llrs[i * k + b] / 2.0;
            }
            lp[i][static_cast<std::size_t>(s)] = acc;
        }
    }
    return lp;
}

void symbol_to_bit_llrs(std::span<const double> log_probs, const Constellation& c, std::vector<double>& out)
{
    for (int b = 0; b < c.bits_per_symbol(); ++b) {
        double l0 = kNegInf;
        double l1 = kNegInf;
        for (int s = 0; s < c.order(); ++s) {
            if (c.bit(s, b) == 0) {
                accumulate_max_star(l0, log_probs[static_cast<std::size_t>(s)]);
            } else {
                accumulate_max_star(l1, log_probs[static_cast<std::size_t>(s)]);
            }
        }
        double llr = 0.0;
        if (l0 == kNegInf && l1 == kNegInf) {
            llr = 0.0;
        } else if (l1 == kNegInf) {
            llr = kLlrMax;
        } else if (l0 == kNegInf) {
            llr = -kLlrMax;
        } else {
            llr = l0 - l1;
        }
        out.push_back(saturate(llr));
    }
}

LlrVector bcjr_detect(const CVector& y, const Cir& cir, double noise_variance, const Constellation& c,
                      const std::optional<LlrVector>& prior_bit_llrs, long long transition_budget)
{
    const int L = cir.memory();
    const auto n_obs = static_cast<int>(y.size());
    const int n_sym = n_obs - L;
    if (n_sym < 1) {
        throw ShapeError("bcjr_detect: observation shorter than channel memory + 1");
    }
    const Trellis tr = build_trellis(cir, c, transition_budget);
    const double var = std::max(noise_variance, kNoiseFloor);
    const int M = c.order();
    const auto S = static_cast<std::size_t>(tr.num_states);

    std::vector<std::vector<double>> log_prior;
    if (prior_bit_llrs) {
        log_prior = symbol_log_priors(*prior_bit_llrs, c, static_cast<std::size_t>(n_sym));
    }

    // Branch metric of stage i for transition t (input ignored on tail stages).
    auto gamma = [&](int i, const Trellis::Transition& t) {
        Complex out;
        if (i >= L && i < n_sym) {
            out = t.output;
        } else {
            out = 0.0;
            if (i < n_sym) out += cir.taps[0] * c.point(t.input);
            for (int k = 0; k < L; ++k) {
                const int pos = i - 1 - k;
                if (pos >= 0 && pos < n_sym) {
                    out += cir.taps[static_cast<std::size_t>(k + 1)] * c.point(tr.digit(t.prev_state, k));
                }
            }
        }
        double g = -std::norm(y(i) - out) / var;
        if (i < n_sym && prior_bit_llrs) {
            g += log_prior[static_cast<std::size_t>(i)][static_cast<std::size_t>(t.input)];
        }
        return g;
    };
    auto active = [&](int i, const Trellis::Transition& t) { return i < n_sym || t.input == 0; };

    std::vector<std::vector<double>> alpha(static_cast<std::size_t>(n_obs) + 1, std::vector<double>(S, kNegInf));
    std::fill(alpha[0].begin(), alpha[0].end(), 0.0);
    for (int i = 0; i < n_obs; ++i) {
        auto& next = alpha[static_cast<std::size_t>(i) + 1];
        const auto& cur = alpha[static_cast<std::size_t>(i)];
        for (const auto& t : tr.transitions) {
            if (!active(i, t) || cur[static_cast<std::size_t>(t.prev_state)] == kNegInf) continue;
            accumulate_max_star(next[static_cast<std::size_t>(t.next_state)],
                                cur[static_cast<std::size_t>(t.prev_state)] + gamma(i, t));
        }
        const double m = *std::max_element(next.begin(), next.end());
        for (auto& v : next) v -= m;
    }

    std::vector<double> beta(S, 0.0);
    std::vector<double> prev_beta(S);
    std::vector<std::vector<double>> sym_lp(static_cast<std::size_t>(n_sym), std::vector<double>(static_cast<std::size_t>(M), kNegInf));
    for (int i = n_obs - 1; i >= 0; --i) {
        std::fill(prev_beta.begin(), prev_beta.end(), kNegInf);
        const auto& a = alpha[static_cast<std::size_t>(i)];
        for (const auto& t : tr.transitions) {
            if (!active(i, t)) continue;
            const double gb = gamma(i, t) + beta[static_cast<std::size_t>(t.next_state)];
            accumulate_max_star(prev_beta[static_cast<std::size_t>(t.prev_state)], gb);
            if (i < n_sym && a[static_cast<std::size_t>(t.prev_state)] != kNegInf) {
                accumulate_max_star(sym_lp[static_cast<std::size_t>(i)][static_cast<std::size_t>(t.input)],
                                    a[static_cast<std::size_t>(t.prev_state)] + gb);
            }
        }
        const double m = *std::max_element(prev_beta.begin(), prev_beta.end());
        for (auto& v : prev_beta) v -= m;
        std::swap(beta, prev_beta);
    }

    LlrVector out;
    out.role = LlrRole::total;
    out.values.reserve(static_cast<std::size_t>(n_sym * c.bits_per_symbol()));
    for (int i = 0; i < n_sym; ++i) {
        symbol_to_bit_llrs(sym_lp[static_cast<std::size_t>(i)], c, out.values);
    }
    return out;
}

namespace {

using Message = std::vector<double>;

void normalise(Message& m)
{
    const double mx = *std::max_element(m.begin(), m.end());
    for (auto& v : m) v -= mx;
}

double spread(const Message& m)
{
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    return *hi - *lo;
}

void damp(Message& msg, const Message& old, double damping)
{
    if (damping >= 1.0) return;
    for (std::size_t k = 0; k < msg.size(); ++k) {
        msg[k] = damping * msg[k] + (1.0 - damping) * old[k];
    }
}

/// Shared VN side of both SPA variants: beliefs, VN→FN messages, snapshots.
struct VnSide {
    const BipartiteGraph& g;
    const Constellation& c;
    std::vector<Message> local; // per VN log-factor (prior and, for the UFG, the self term)
    std::vector<Message> f2v;   // per edge
    std::vector<Message> v2f;   // per edge
    std::vector<bool> vn_active;

    void update_v2f(double damping, bool& bad)
    {
        for (int v = 0; v < g.num_vn; ++v) {
            if (!vn_active[static_cast<std::size_t>(v)]) continue;
            Message total = local[static_cast<std::size_t>(v)];
            for (int e : g.vn_edges[static_cast<std::size_t>(v)]) {
                for (std::size_t k = 0; k < total.size(); ++k) total[k] += f2v[static_cast<std::size_t>(e)][k];
            }
            for (int e : g.vn_edges[static_cast<std::size_t>(v)]) {
                Message m = total;
                for (std::size_t k = 0; k < m.size(); ++k) m[k] -= f2v[static_cast<std::size_t>(e)][k];
                normalise(m);
                damp(m, v2f[static_cast<std::size_t>(e)], damping);
                if (!std::isfinite(spread(m))) bad = true;
                v2f[static_cast<std::size_t>(e)] = std::move(m);
            }
        }
    }

    LlrVector snapshot() const
    {
        LlrVector out;
        out.role = LlrRole::total;
        for (int v : g.readout_vns) {
            Message total = local[static_cast<std::size_t>(v)];
            for (int e : g.vn_edges[static_cast<std::size_t>(v)]) {
                for (std::size_t k = 0; k < total.size(); ++k) total[k] += f2v[static_cast<std::size_t>(e)][k];
            }
            symbol_to_bit_llrs(total, c, out.values);
        }
        return out;
    }
};

// A decision held with |ℓ| ≥ threshold that reverses to |ℓ| ≥ threshold in one iteration.
bool confident_flip(const std::vector<LlrVector>& snapshots, double threshold)
{
    if (snapshots.size() < 2) return false;
    const auto& prev = snapshots[snapshots.size() - 2];
    const auto& cur = snapshots.back();
    for (std::size_t i = 0; i < cur.size(); ++i) {
        if (std::abs(prev[i]) >= threshold && std::abs(cur[i]) >= threshold && (prev[i] < 0) != (cur[i] < 0)) {
            return true;
        }
    }
    return false;
}

void check_inputs(const SpaOptions& options)
{
    if (!(options.damping > 0.0) || options.damping > 1.0) {
        throw std::invalid_argument("SPA damping must lie in (0, 1]");
    }
    if (options.iterations < 1) {
        throw std::invalid_argument("SPA needs at least one iteration");
    }
}

} // namespace

SpaResult spa_detect_ffg(const BipartiteGraph& graph, const CVector& y, const Cir& cir, double noise_variance,
                         const Constellation& c, const SpaOptions& options,
                         const std::optional<LlrVector>& prior_bit_llrs)
{
    check_inputs(options);
    const int L = cir.memory();
    const int M = c.order();
    if (graph.num_fn != static_cast<int>(y.size()) || graph.num_edge_types != L + 1) {
        throw ShapeError("spa_detect_ffg: graph does not match observation length / channel memory");
    }
    if (ipow(M, L + 1) > options.likelihood_budget) {
        throw BudgetExceeded("FFG factor needs M^(L+1) = " + std::to_string(ipow(M, L + 1)) + " configurations");
    }
    const double var = std::max(noise_variance, kNoiseFloor);
    const auto n_sym = graph.readout_vns.size();

    VnSide side{graph, c, {}, {}, {}, {}};
    side.local.assign(static_cast<std::size_t>(graph.num_vn), Message(static_cast<std::size_t>(M), 0.0));
    side.vn_active.resize(static_cast<std::size_t>(graph.num_vn));
    for (int v = 0; v < graph.num_vn; ++v) {
        side.vn_active[static_cast<std::size_t>(v)] = graph.vn_kind[static_cast<std::size_t>(v)] != VnKind::virtual_node;
    }
    if (prior_bit_llrs) {
        const auto lp = symbol_log_priors(*prior_bit_llrs, c, n_sym);
        for (std::size_t i = 0; i < n_sym; ++i) side.local[static_cast<std::size_t>(graph.readout_vns[i])] = lp[i];
    }
    side.f2v.assign(graph.edges.size(), Message(static_cast<std::size_t>(M), 0.0));
    side.v2f.assign(graph.edges.size(), Message(static_cast<std::size_t>(M), 0.0));
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        side.v2f[e] = side.local[static_cast<std::size_t>(graph.edges[e].vn)];
        normalise(side.v2f[e]);
    }

    SpaResult res;
    std::vector<int> act_edges;
    std::vector<int> cfg;
    std::vector<Message> out;
    for (int it = 1; it <= options.iterations; ++it) {
        bool bad = false;
        for (int f = 0; f < graph.num_fn; ++f) {
            act_edges.clear();
            for (int e : graph.fn_edges[static_cast<std::size_t>(f)]) {
                if (side.vn_active[static_cast<std::size_t>(graph.edges[static_cast<std::size_t>(e)].vn)]) act_edges.push_back(e);
            }
            const std::size_t p = act_edges.size();
            out.assign(p, Message(static_cast<std::size_t>(M), kNegInf));
            cfg.assign(p, 0);
            const long long total_cfg = ipow(M, static_cast<int>(p));
            for (long long k = 0; k < total_cfg; ++k) {
                long long rem = k;
                Complex mean = 0.0;
                double sum_in = 0.0;
                for (std::size_t q = 0; q < p; ++q) {
                    cfg[q] = static_cast<int>(rem % M);
                    rem /= M;
                    const Edge& ed = graph.edges[static_cast<std::size_t>(act_edges[q])];
                    mean += cir.taps[static_cast<std::size_t>(ed.type)] * c.point(cfg[q]);
                    sum_in += side.v2f[static_cast<std::size_t>(act_edges[q])][static_cast<std::size_t>(cfg[q])];
                }
                const double base = -std::norm(y(f) - mean) / var + sum_in;
                for (std::size_t q = 0; q < p; ++q) {
                    const double v = base - side.v2f[static_cast<std::size_t>(act_edges[q])][static_cast<std::size_t>(cfg[q])];
                    accumulate_max_star(out[q][static_cast<std::size_t>(cfg[q])], v);
                }
            }
            for (std::size_t q = 0; q < p; ++q) {
                normalise(out[q]);
                damp(out[q], side.f2v[static_cast<std::size_t>(act_edges[q])], options.damping);
                if (!std::isfinite(spread(out[q]))) bad = true;
                side.f2v[static_cast<std::size_t>(act_edges[q])] = std::move(out[q]);
            }
        }
        side.update_v2f(options.damping, bad);
        res.per_iteration.push_back(side.snapshot());
        bad = bad || confident_flip(res.per_iteration, options.divergence_threshold);
        if (bad && !res.diverged) {
            res.diverged = true;
            res.divergence_iteration = it;
        }
    }
    return res;
}

SpaResult spa_detect_ufg(const BipartiteGraph& graph, const UfgStatistics& stats, int memory, double noise_variance,
                         const Constellation& c, const SpaOptions& options,
                         const std::optional<LlrVector>& prior_bit_llrs)
{
    check_inputs(options);
    const int L = memory;
    const int M = c.order();
    const int n_sym = graph.num_vn;
    if (stats.matched.size() != n_sym + 2 * L) {
        throw ShapeError("spa_detect_ufg: statistics do not match graph size");
    }
    const double var = std::max(noise_variance, kNoiseFloor);

    VnSide side{graph, c, {}, {}, {}, std::vector<bool>(static_cast<std::size_t>(n_sym), true)};
    side.local.assign(static_cast<std::size_t>(n_sym), Message(static_cast<std::size_t>(M), 0.0));
    std::vector<std::vector<double>> lp;
    if (prior_bit_llrs) lp = symbol_log_priors(*prior_bit_llrs, c, static_cast<std::size_t>(n_sym));
    for (int i = 0; i < n_sym; ++i) {
        const Complex chi = stats.matched(i + L);
        const double gii = stats.gram(i + L, i + L).real();
        for (int s = 0; s < M; ++s) {
            const Complex x = c.point(s);
            double v = (2.0 * (std::conj(chi) * x).real() - gii * std::norm(x)) / var;
            if (prior_bit_llrs) v += lp[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
            side.local[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] = v;
        }
    }
    side.f2v.assign(graph.edges.size(), Message(static_cast<std::size_t>(M), 0.0));
    side.v2f.assign(graph.edges.size(), Message(static_cast<std::size_t>(M), 0.0));
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        side.v2f[e] = side.local[static_cast<std::size_t>(graph.edges[e].vn)];
        normalise(side.v2f[e]);
    }

    SpaResult res;
    for (int it = 1; it <= options.iterations; ++it) {
        bool bad = false;
        std::vector<Message> fresh(graph.edges.size());
        for (int f = 0; f < graph.num_fn; ++f) {
            const auto& fe = graph.fn_edges[static_cast<std::size_t>(f)];
            const int ea = fe[0];
            const int eb = fe[1];
            const int va = graph.edges[static_cast<std::size_t>(ea)].vn;
            const int vb = graph.edges[static_cast<std::size_t>(eb)].vn;
            const Complex gab = stats.gram(va + L, vb + L);
            Message to_a(static_cast<std::size_t>(M), kNegInf);
            Message to_b(static_cast<std::size_t>(M), kNegInf);
            for (int sa = 0; sa < M; ++sa) {
                for (int sb = 0; sb < M; ++sb) {
                    const double pair = -2.0 * (std::conj(c.point(sa)) * gab * c.point(sb)).real() / var;
                    accumulate_max_star(to_a[static_cast<std::size_t>(sa)], pair + side.v2f[static_cast<std::size_t>(eb)][static_cast<std::size_t>(sb)]);
                    accumulate_max_star(to_b[static_cast<std::size_t>(sb)], pair + side.v2f[static_cast<std::size_t>(ea)][static_cast<std::size_t>(sa)]);
                }
            }
            fresh[static_cast<std::size_t>(ea)] = std::move(to_a);
            fresh[static_cast<std::size_t>(eb)] = std::move(to_b);
        }
        for (std::size_t e = 0; e < graph.edges.size(); ++e) {
            normalise(fresh[e]);
            damp(fresh[e], side.f2v[e], options.damping);
            if (!std::isfinite(spread(fresh[e]))) bad = true;
            side.f2v[e] = std::move(fresh[e]);
        }
        side.update_v2f(options.damping, bad);
        res.per_iteration.push_back(side.snapshot());
        bad = bad || confident_flip(res.per_iteration, options.divergence_threshold);
        if (bad && !res.diverged) {
            res.diverged = true;
            res.divergence_iteration = it;
        }
    }
    return res;
}

void demap_memoryless(Complex z, double noise_variance, const Constellation& c, std::vector<double>& out)
{
    const double v = std::max(noise_variance, kNoiseFloor);
    std::vector<double> lp(static_cast<std::size_t>(c.order()));
    for (int s = 0; s < c.order(); ++s) {
        lp[static_cast<std::size_t>(s)] = -std::norm(z - c.point(s)) / v;
    }
    symbol_to_bit_llrs(lp, c, out);
}

LmmseResult lmmse_detect(const CVector& y, const CMatrix& channel_matrix, int memory, double noise_variance,
                         const Constellation& c)
{
    const auto n_sym = channel_matrix.cols() - 2 * memory;
    if (n_sym < 1 || channel_matrix.rows() != y.size()) {
        throw ShapeError("lmmse_detect: channel matrix does not match observations");
    }
    const CMatrix hp = channel_matrix.middleCols(memory, n_sym);
    LmmseResult res;
    double reg = noise_variance;
    if (noise_variance <= 0.0) {
        Eigen::ColPivHouseholderQR<CMatrix> qr(hp);
        if (qr.rank() < n_sym) {
            reg = 1e-10;
            res.regularized = true;
        }
    }
    CMatrix a = hp.adjoint() * hp;
    a.diagonal().array() += reg;
    Eigen::LDLT<CMatrix> solver(a);
    if (solver.info() != Eigen::Success) {
        a.diagonal().array() += 1e-10;
        solver.compute(a);
        res.regularized = true;
    }
    const CMatrix w = solver.solve(hp.adjoint());
    res.estimates = w * y;
    const CMatrix wh = w * hp;
    res.gains.resize(n_sym);
    res.llrs.role = LlrRole::total;
    for (Eigen::Index i = 0; i < n_sym; ++i) {
        const double mu = std::clamp(wh(i, i).real(), 1e-12, 1.0);
        res.gains(i) = mu;
        const Complex z = res.estimates(i) / mu;
        const double v = std::max((1.0 - mu) / mu, kNoiseFloor);
        demap_memoryless(z, v, c, res.llrs.values);
    }
    return res;
}

} // namespace gnnrx
