#include "gnnrx/gnn.hpp"

#include "gnnrx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace gnnrx {

using nn::Index;
using nn::IndexList;
using nn::Matrix;
using Var = nn::Tape::Var;

std::string to_string(EmbeddingKind k)
{
    switch (k) {
    case EmbeddingKind::linear: return "linear";
    case EmbeddingKind::llr: return "llr";
    case EmbeddingKind::neural_csi: return "neural_csi";
    case EmbeddingKind::cct: return "cct";
    }
    return "?";
}

EmbeddingKind parse_embedding(std::string_view s)
{
    if (s == "linear") return EmbeddingKind::linear;
    if (s == "llr") return EmbeddingKind::llr;
    if (s == "neural_csi" || s == "nn") return EmbeddingKind::neural_csi;
    if (s == "cct") return EmbeddingKind::cct;
    throw std::invalid_argument("unknown embedding '" + std::string(s) + "'");
}

std::string to_string(GnnVariant v) { return v == GnnVariant::gnn ? "gnn" : "fgnn"; }

GnnVariant parse_variant(std::string_view s)
{
    if (s == "gnn") return GnnVariant::gnn;
    if (s == "fgnn") return GnnVariant::fgnn;
    throw std::invalid_argument("unknown GNN variant '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- schedule

Schedule Schedule::flooding(int iterations)
{
    if (iterations < 1) throw std::invalid_argument("schedule needs at least one iteration");
    return Schedule{Kind::flooding, iterations, {1}};
}

Schedule Schedule::sequential(int outer, int detection_iterations, int check_iterations)
{
    if (outer < 1 || detection_iterations < 0 || check_iterations < 0 || detection_iterations + check_iterations < 1) {
        throw std::invalid_argument("invalid sequential schedule");
    }
    return Schedule{Kind::sequential, outer, {detection_iterations, check_iterations}};
}

Schedule Schedule::parse(std::string_view text)
{
    std::string t;
    for (char ch : text) {
        if (!std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    }
    std::smatch m;
    if (std::regex_match(t, m, std::regex(R"(\(?(\d+)\)?)"))) return flooding(std::stoi(m[1]));
    if (std::regex_match(t, m, std::regex(R"(\((\d+),(\d+)\))"))) {
        if (std::stoi(m[2]) != 1) throw std::invalid_argument("flooding schedule must have inner count 1: " + t);
        return flooding(std::stoi(m[1]));
    }
    if (std::regex_match(t, m, std::regex(R"(\((\d+),\[(\d+),(\d+)\]\))"))) {
        return sequential(std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]));
    }
    throw std::invalid_argument("cannot parse schedule '" + t + "'");
}

std::string Schedule::str() const
{
    if (kind == Kind::flooding) return "(" + std::to_string(outer) + ",1)";
    return "(" + std::to_string(outer) + ",[" + std::to_string(inner[0]) + "," + std::to_string(inner[1]) + "])";
}

std::vector<Schedule::Step> Schedule::expand() const
{
    std::vector<Step> out;
    for (int o = 0; o < outer; ++o) {
        if (kind == Kind::flooding) {
            out.push_back(Step{true, true});
            continue;
        }
        for (int k = 0; k < inner[0]; ++k) out.push_back(Step{true, false});
        for (int k = 0; k < inner[1]; ++k) out.push_back(Step{false, true});
    }
    return out;
}

int Schedule::total_iterations() const { return static_cast<int>(expand().size()); }

// ---------------------------------------------------------------- config / model

int GnnConfig::bits_per_symbol() const { return Constellation(modulation_order).bits_per_symbol(); }

int GnnConfig::detection_edge_types() const
{
    if (graph == DetectionGraphKind::ffg) return memory + 1;
    return std::max(1, 2 * memory);
}

namespace {

int embedding_input_dim(const GnnConfig& c)
{
    const int s = c.embed_noise_variance ? 1 : 0;
    const bool ffg = c.graph == DetectionGraphKind::ffg;
    switch (c.embedding) {
    case EmbeddingKind::linear: return (ffg ? 2 : 3) + s;
    case EmbeddingKind::cct: return 2 + s;
    case EmbeddingKind::neural_csi: return 2 + 2 * (c.memory + 1) + s;
    case EmbeddingKind::llr: {
        if (!ffg) return c.modulation_order;
        long long n = 1;
        for (int l = 0; l <= c.memory; ++l) {
            n *= c.modulation_order;
            if (n > c.likelihood_budget) {
                throw BudgetExceeded("LLR embedding needs M^(L+1) = " + std::to_string(c.modulation_order) + "^" +
                                     std::to_string(c.memory + 1) + " inputs, above the budget");
            }
        }
        return static_cast<int>(n);
    }
    }
    return 0;
}

std::vector<int> mlp_dims(int in, const GnnConfig& c, int out)
{
    std::vector<int> dims{in};
    for (int k = 0; k < c.hidden_layers; ++k) dims.push_back(c.hidden_units);
    dims.push_back(out);
    return dims;
}

} // namespace

nn::Matrix cct_band(int num_symbols, int memory)
{
    Matrix m = Matrix::Zero(num_symbols + memory, num_symbols + 2 * memory);
    for (int i = 0; i < m.rows(); ++i) {
        for (int k = 0; k <= memory; ++k) m(i, i + k) = 1.0;
    }
    return m;
}

GnnModel::GnnModel(const GnnConfig& config, std::uint64_t seed) : config_(config)
{
    const int d = config.feature_size;
    if (d < 1 || config.hidden_layers < 0 || config.hidden_units < 1 || config.memory < 0) {
        throw std::invalid_argument("invalid GNN dimensions");
    }
    const int k = config.bits_per_symbol();
    if (config.check_nodes && k != 1) throw UnsupportedConfiguration("joint detection/decoding requires BPSK");
    if (config.embedding == EmbeddingKind::cct) {
        if (config.graph != DetectionGraphKind::ffg) throw UnsupportedConfiguration("CCT embedding needs an FFG");
        if (config.num_symbols < 1) throw std::invalid_argument("CCT embedding needs num_symbols");
    }
    const int np = config.detection_edge_types();
    nn::Rng rng(seed);
    const bool plain = config.variant == GnnVariant::gnn;

    if (plain) {
        vn = nn::add_mlp(params_, "vn", nn::make_mlp(mlp_dims(3 * d, config, d), rng));
        vn_attr = params_.add("attr.vn", nn::normal_init(3, d, rng));
    }
    const char* names[2] = {"det", "chk"};
    for (int c = 0; c < 2; ++c) {
        if (c == 1 && !config.check_nodes) continue;
        auto& cls = classes[static_cast<std::size_t>(c)];
        cls.present = true;
        const std::string p = names[c];
        if (plain) {
            cls.fn = nn::add_mlp(params_, p + ".fn", nn::make_mlp(mlp_dims(3 * d, config, d), rng));
            cls.to_vn = nn::add_mlp(params_, p + ".fv", nn::make_mlp(mlp_dims(3 * d, config, d), rng));
            cls.to_fn = nn::add_mlp(params_, p + ".vf", nn::make_mlp(mlp_dims(3 * d, config, d), rng));
        } else {
            cls.to_vn = nn::add_mlp(params_, p + ".fv", nn::make_mlp(mlp_dims(2 * d, config, d), rng));
            cls.to_fn = nn::add_mlp(params_, p + ".vf", nn::make_mlp(mlp_dims(2 * d, config, d), rng));
            cls.edge = nn::add_mlp(params_, p + ".edge", nn::make_mlp({d, d, d * d}, rng));
        }
        if (c == 0) {
            if (plain) cls.fn_attr = params_.add("attr.det.fn", nn::normal_init(1, d, rng));
            cls.to_vn_attr = params_.add("attr.det.fv", nn::normal_init(np, d, rng));
            cls.to_fn_attr = params_.add("attr.det.vf", nn::normal_init(np, d, rng));
        }
    }

    const int in = embedding_input_dim(config);
    if (config.embedding == EmbeddingKind::neural_csi) {
        embed_mlp = nn::add_mlp(params_, "embed.mlp", nn::make_mlp(mlp_dims(in, config, d), rng));
    } else {
        embed_matrix = params_.add("embed.w", nn::glorot_init(in, d, rng));
    }
    if (config.embedding == EmbeddingKind::cct) {
        cct_mask_ = cct_band(config.num_symbols, config.memory);
        cct_filter = params_.add("embed.cct", cct_mask_);
    }
    if (config.prior_embedding) prior_matrix = params_.add("prior.w", nn::glorot_init(k, d, rng));
    readout = params_.add("readout", nn::glorot_init(k, d, rng));
}

// ---------------------------------------------------------------- plain helpers

std::vector<double> ffg_log_likelihoods(Complex y, const Cir& cir, double noise_variance, const Constellation& c,
                                        const std::vector<bool>& valid)
{
    const int taps = static_cast<int>(cir.taps.size());
    if (static_cast<int>(valid.size()) != taps) throw ShapeError("ffg_log_likelihoods: mask length differs from CIR");
    if (!(noise_variance > 0.0)) throw std::invalid_argument("ffg_log_likelihoods: σ² must be positive");
    const int m = c.order();
    std::size_t n = 1;
    for (int l = 0; l < taps; ++l) n *= static_cast<std::size_t>(m);
    std::vector<double> out(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        Complex mean = 0.0;
        std::size_t rest = idx;
        for (int l = 0; l < taps; ++l) {
            const int s = static_cast<int>(rest % static_cast<std::size_t>(m));
            rest /= static_cast<std::size_t>(m);
            if (valid[static_cast<std::size_t>(l)]) mean += cir.taps[static_cast<std::size_t>(l)] * c.point(s);
        }
        out[idx] = -std::norm(y - mean) / noise_variance;
    }
    const double top = *std::max_element(out.begin(), out.end());
    for (double& v : out) v = std::max(v - top, -kLlrMax);
    return out;
}

namespace {

// LDLT of HᴴH + I/σ², with a diagonal floor when singular or σ² is zero.
Eigen::LDLT<CMatrix> cct_system(const CMatrix& h, double noise_variance, bool* regularized)
{
    bool reg = false;
    double load = 1.0 / noise_variance;
    if (!std::isfinite(load)) {
        load = 1e12;
        reg = true;
    }
    CMatrix a = h.adjoint() * h;
    a.diagonal().array() += load;
    Eigen::LDLT<CMatrix> ldlt(a);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    const double dmin = ldlt.vectorD().cwiseAbs().minCoeff();
    if (ldlt.info() != Eigen::Success || !(dmin > 1e-12 * std::max(dmax, 1.0))) {
        a.diagonal().array() += 1e-9 * std::max(dmax, 1.0);
        ldlt.compute(a);
        reg = true;
    }
    if (regularized) *regularized = reg;
    return ldlt;
}

} // namespace

CVector cct_prefilter(const CMatrix& channel_matrix, double noise_variance, const CVector& y, bool* regularized)
{
    if (y.size() != channel_matrix.rows()) throw ShapeError("cct: observation length differs from H rows");
    return cct_system(channel_matrix, noise_variance, regularized).solve(channel_matrix.adjoint() * y);
}

CctResult cct_filter(const CMatrix& channel_matrix, double noise_variance, const nn::Matrix& target,
                     const CVector& y)
{
    if (target.cols() != channel_matrix.cols()) throw ShapeError("cct: H̃ must have as many columns as H");
    if (y.size() != channel_matrix.rows()) throw ShapeError("cct: observation length differs from H rows");
    CctResult r;
    const CMatrix inner = cct_system(channel_matrix, noise_variance, &r.regularized).solve(channel_matrix.adjoint());
    r.filter = target.cast<Complex>() * inner;
    r.output = r.filter * y;
    return r;
}

// ---------------------------------------------------------------- batched forward

namespace {

struct Layout {
    int frames = 0;
    int nv = 0;
    std::array<int, 2> nf{0, 0};
    std::array<IndexList, 2> e_vn;
    std::array<IndexList, 2> e_fn;
    std::array<IndexList, 2> e_type;
    std::array<Index, 2> ne{0, 0};
    IndexList vn_kind_rows;
    IndexList seg_det, seg_chk, seg_both;
    IndexList readout;
    std::vector<int> payload_symbol; // per base VN, −1 otherwise
    std::vector<int> det_fn_local;   // base FN id of local detection FN
    int num_payload = 0;
};

Layout make_layout(const BipartiteGraph& g, int frames)
{
    Layout lay;
    lay.frames = frames;
    lay.nv = g.num_vn;
    std::vector<int> local(static_cast<std::size_t>(g.num_fn));
    for (int f = 0; f < g.num_fn; ++f) {
        const int c = static_cast<int>(g.fn_class[static_cast<std::size_t>(f)]);
        local[static_cast<std::size_t>(f)] = lay.nf[static_cast<std::size_t>(c)]++;
        if (c == 0) lay.det_fn_local.push_back(f);
    }
    std::array<std::vector<const Edge*>, 2> by_class;
    for (const auto& e : g.edges) by_class[static_cast<std::size_t>(g.fn_class[static_cast<std::size_t>(e.fn)])].push_back(&e);
    std::array<std::vector<Index>, 2> seg;
    for (int c = 0; c < 2; ++c) {
        std::vector<Index> vn;
        std::vector<Index> fn;
        std::vector<Index> ty;
        const auto& es = by_class[static_cast<std::size_t>(c)];
        for (int b = 0; b < frames; ++b) {
            for (const Edge* e : es) {
                vn.push_back(static_cast<Index>(b) * g.num_vn + e->vn);
                fn.push_back(static_cast<Index>(b) * lay.nf[static_cast<std::size_t>(c)] +
                             local[static_cast<std::size_t>(e->fn)]);
                ty.push_back(c == 0 ? e->type : 0);
            }
        }
        lay.ne[static_cast<std::size_t>(c)] = static_cast<Index>(vn.size());
        seg[static_cast<std::size_t>(c)] = vn;
        lay.e_vn[static_cast<std::size_t>(c)] = nn::make_index_list(std::move(vn));
        lay.e_fn[static_cast<std::size_t>(c)] = nn::make_index_list(std::move(fn));
        lay.e_type[static_cast<std::size_t>(c)] = nn::make_index_list(std::move(ty));
    }
    lay.seg_det = lay.e_vn[0];
    lay.seg_chk = lay.e_vn[1];
    std::vector<Index> both = seg[0];
    both.insert(both.end(), seg[1].begin(), seg[1].end());
    lay.seg_both = nn::make_index_list(std::move(both));

    std::vector<Index> kinds;
    for (int b = 0; b < frames; ++b) {
        for (int v = 0; v < g.num_vn; ++v) kinds.push_back(static_cast<Index>(g.vn_kind[static_cast<std::size_t>(v)]));
    }
    lay.vn_kind_rows = nn::make_index_list(std::move(kinds));
    std::vector<Index> ro;
    for (int b = 0; b < frames; ++b) {
        for (int v : g.readout_vns) ro.push_back(static_cast<Index>(b) * g.num_vn + v);
    }
    lay.readout = nn::make_index_list(std::move(ro));
    lay.payload_symbol.assign(static_cast<std::size_t>(g.num_vn), -1);
    for (int v = 0; v < g.num_vn; ++v) {
        if (g.vn_kind[static_cast<std::size_t>(v)] == VnKind::payload) lay.payload_symbol[static_cast<std::size_t>(v)] = lay.num_payload++;
    }
    return lay;
}

void require_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite()) throw NumericalDivergence(std::string("non-finite ") + what + " in GNN forward pass");
}

// Embedding input rows: FFG → one per detection FN (frame-major), UFG → one per VN.
Matrix embedding_features(const GnnModel& model, const Layout& lay, std::span<const FrameInput> batch)
{
    const auto& cfg = model.config();
    const bool ffg = cfg.graph == DetectionGraphKind::ffg;
    const int in = embedding_input_dim(cfg);
    const int L = cfg.memory;
    const int nx = lay.num_payload;
    const Constellation con(cfg.modulation_order);
    const Index rows_per = ffg ? lay.nf[0] : lay.nv;
    Matrix f = Matrix::Zero(static_cast<Index>(batch.size()) * rows_per, in);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& fr = batch[b];
        if (fr.cir.memory() != L) throw ShapeError("frame CIR memory differs from the model memory");
        if (!(fr.noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
        if (fr.y.size() != nx + L) throw ShapeError("observation length differs from the graph");
        const Index base = static_cast<Index>(b) * rows_per;
        auto put_csi = [&](Index r, int col) {
            for (int l = 0; l <= L; ++l) {
                f(r, col + l) = fr.cir.taps[static_cast<std::size_t>(l)].real();
                f(r, col + L + 1 + l) = fr.cir.taps[static_cast<std::size_t>(l)].imag();
            }
        };
        if (ffg) {
            if (static_cast<int>(lay.det_fn_local.size()) != nx + L) throw ShapeError("FFG expects N_x+L detection FNs");
            for (int i = 0; i < nx + L; ++i) {
                const Index r = base + i;
                const Complex y = fr.y(i);
                switch (cfg.embedding) {
                case EmbeddingKind::linear:
                case EmbeddingKind::cct: // cct rows are rebuilt on the tape
                    f(r, 0) = y.real();
                    f(r, 1) = y.imag();
                    break;
                case EmbeddingKind::neural_csi:
                    f(r, 0) = y.real();
                    f(r, 1) = y.imag();
                    put_csi(r, 2);
                    break;
                case EmbeddingKind::llr: {
                    std::vector<bool> valid(static_cast<std::size_t>(L + 1));
                    for (int l = 0; l <= L; ++l) valid[static_cast<std::size_t>(l)] = i - l >= 0 && i - l < nx;
                    const auto ll = ffg_log_likelihoods(y, fr.cir, fr.noise_variance, con, valid);
                    for (std::size_t k = 0; k < ll.size(); ++k) f(r, static_cast<Index>(k)) = ll[k];
                    break;
                }
                }
                if (cfg.embed_noise_variance && cfg.embedding != EmbeddingKind::llr) f(r, in - 1) = fr.noise_variance;
            }
        } else {
            const auto st = ufg_statistics(build_channel_matrix(fr.cir, nx), fr.y, L);
            for (int v = 0; v < lay.nv; ++v) {
                const int s = lay.payload_symbol[static_cast<std::size_t>(v)];
                if (s < 0) continue;
                const Index r = base + v;
                const Complex chi = st.matched(s + L);
                const double gii = st.gram(s + L, s + L).real();
                switch (cfg.embedding) {
                case EmbeddingKind::linear:
                    f(r, 0) = chi.real();
                    f(r, 1) = chi.imag();
                    f(r, 2) = gii;
                    break;
                case EmbeddingKind::neural_csi:
                    f(r, 0) = chi.real();
                    f(r, 1) = chi.imag();
                    put_csi(r, 2);
                    break;
                case EmbeddingKind::llr: {
                    std::vector<double> ll(static_cast<std::size_t>(con.order()));
                    for (int m = 0; m < con.order(); ++m) {
                        const Complex x = con.point(m);
                        ll[static_cast<std::size_t>(m)] = (2.0 * (std::conj(chi) * x).real() - gii * std::norm(x)) / fr.noise_variance;
                    }
                    const double top = *std::max_element(ll.begin(), ll.end());
                    for (int m = 0; m < con.order(); ++m) f(r, m) = std::max(ll[static_cast<std::size_t>(m)] - top, -kLlrMax);
                    break;
                }
                case EmbeddingKind::cct: throw UnsupportedConfiguration("CCT embedding needs an FFG");
                }
                if (cfg.embed_noise_variance && cfg.embedding != EmbeddingKind::llr) f(r, in - 1) = fr.noise_variance;
            }
        }
    }
    return f;
}

Var zeros(nn::Tape& tape, Index rows, Index cols) { return tape.constant(Matrix::Zero(rows, cols)); }

Var projection(nn::Tape& tape, Var x, std::size_t w, int d)
{
    return tape.affine(x, tape.parameter(w), tape.constant(Matrix::Zero(d, 1)));
}

Var cct_rows(nn::Tape& tape, const GnnModel& model, const Layout& lay, std::span<const FrameInput> batch)
{
    const auto& cfg = model.config();
    const int nx = lay.num_payload;
    if (nx != cfg.num_symbols) throw ShapeError("CCT filter was built for a different block length");
    const Var target = tape.hadamard(tape.parameter(*model.cct_filter), tape.constant(model.cct_mask()));
    std::vector<Var> rows;
    for (const auto& fr : batch) {
        const CVector z = cct_prefilter(build_channel_matrix(fr.cir, nx), fr.noise_variance, fr.y, nullptr);
        Matrix zr(z.size(), 2);
        zr.col(0) = z.real();
        zr.col(1) = z.imag();
        Var yt = tape.matmul(target, tape.constant(std::move(zr)));
        if (cfg.embed_noise_variance) {
            const std::array<Var, 2> parts{yt, tape.constant(Matrix::Constant(nx + cfg.memory, 1, fr.noise_variance))};
            yt = tape.concat_cols(parts);
        }
        rows.push_back(yt);
    }
    return tape.concat_rows(rows);
}

} // namespace

ForwardPass gnn_forward(nn::Tape& tape, const GnnModel& model, const BipartiteGraph& graph,
                        std::span<const FrameInput> batch, const Schedule& schedule)
{
    const auto& cfg = model.config();
    const int d = cfg.feature_size;
    const int k = cfg.bits_per_symbol();
    if (batch.empty()) throw ShapeError("empty batch");
    if (graph.count_fn(FnClass::check) > 0 && !model.classes[1].present) {
        throw UnsupportedConfiguration("graph has check FNs but the model has no check-class networks");
    }
    if (graph.count_fn(FnClass::detection) > 0 && graph.num_edge_types != cfg.detection_edge_types()) {
        throw ShapeError("graph edge-type count N_p differs from the model");
    }
    const Layout lay = make_layout(graph, static_cast<int>(batch.size()));
    const Index B = lay.frames;
    const Index nv = B * lay.nv;
    const bool plain = cfg.variant == GnnVariant::gnn;
    const bool ffg = cfg.graph == DetectionGraphKind::ffg;

    // ---- embedding
    Var emb;
    if (cfg.embedding == EmbeddingKind::cct) {
        emb = projection(tape, cct_rows(tape, model, lay, batch), *model.embed_matrix, d);
    } else {
        const Var feat = tape.constant(embedding_features(model, lay, batch));
        emb = cfg.embedding == EmbeddingKind::neural_csi ? nn::mlp_apply(tape, model.embed_mlp, feat)
                                                         : projection(tape, feat, *model.embed_matrix, d);
    }
    Var sv;
    std::array<Var, 2> sf;
    if (ffg) {
        sv = zeros(tape, nv, d);
        sf[0] = emb;
    } else {
        // non-payload VN rows carry zero features; zero them explicitly for the MLP embedding
        Matrix mask = Matrix::Zero(nv, d);
        for (Index b = 0; b < B; ++b) {
            for (int v = 0; v < lay.nv; ++v) {
                if (lay.payload_symbol[static_cast<std::size_t>(v)] >= 0) mask.row(b * lay.nv + v).setOnes();
            }
        }
        sv = tape.hadamard(emb, tape.constant(std::move(mask)));
        sf[0] = zeros(tape, B * lay.nf[0], d);
    }
    sf[1] = zeros(tape, B * lay.nf[1], d);

    const auto n_read = static_cast<Index>(graph.readout_vns.size());
    const bool has_prior = std::any_of(batch.begin(), batch.end(), [](const FrameInput& f) { return f.prior.has_value(); });
    if (has_prior && !cfg.prior_embedding) throw UnsupportedConfiguration("prior LLRs given to a model without prior embedding");
    if (cfg.prior_embedding) {
        Matrix pr = Matrix::Zero(nv, k);
        for (Index b = 0; b < B; ++b) {
            const auto& p = batch[static_cast<std::size_t>(b)].prior;
            if (!p) continue;
            if (static_cast<Index>(p->size()) != n_read * k) throw ShapeError("prior length differs from readout bits");
            for (Index j = 0; j < n_read; ++j) {
                for (int q = 0; q < k; ++q) {
                    pr(b * lay.nv + graph.readout_vns[static_cast<std::size_t>(j)], q) =
                        (*p)[static_cast<std::size_t>(j * k + q)];
                }
            }
        }
        sv = tape.add(sv, projection(tape, tape.constant(std::move(pr)), *model.prior_matrix, d));
    }

    // ---- per-class constants
    std::array<Var, 2> att_fv;
    std::array<Var, 2> att_vf;
    std::array<Var, 2> att_f;
    std::array<Var, 2> emat_fv;
    std::array<Var, 2> emat_vf;
    for (int c = 0; c < 2; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const auto& cls = model.classes[cu];
        if (!cls.present || lay.ne[cu] == 0) continue;
        Var g_fv;
        Var g_vf;
        if (c == 0) {
            g_fv = tape.parameter(*cls.to_vn_attr);
            g_vf = tape.parameter(*cls.to_fn_attr);
        } else {
            g_fv = zeros(tape, 1, d);
            g_vf = g_fv;
        }
        if (plain) {
            att_fv[cu] = tape.gather_rows(g_fv, lay.e_type[cu]);
            att_vf[cu] = tape.gather_rows(g_vf, lay.e_type[cu]);
            if (c == 0) {
                att_f[cu] = tape.gather_rows(tape.parameter(*cls.fn_attr),
                                             nn::make_index_list(std::vector<Index>(static_cast<std::size_t>(B * lay.nf[0]), 0)));
            } else {
                att_f[cu] = zeros(tape, B * lay.nf[1], d);
            }
        } else {
            emat_fv[cu] = tape.gather_rows(nn::mlp_apply(tape, cls.edge, g_fv), lay.e_type[cu]);
            emat_vf[cu] = tape.gather_rows(nn::mlp_apply(tape, cls.edge, g_vf), lay.e_type[cu]);
        }
    }
    Var att_v;
    if (plain) att_v = tape.gather_rows(tape.parameter(*model.vn_attr), lay.vn_kind_rows);

    ForwardPass out;
    const Var readout = tape.parameter(model.readout);
    for (const auto& step : schedule.expand()) {
        std::array<bool, 2> active{step.detection && lay.ne[0] > 0, step.check && lay.ne[1] > 0};
        // FN → VN
        std::vector<Var> msgs;
        for (int c = 0; c < 2; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            if (!active[cu]) continue;
            const Var s_f = tape.gather_rows(sf[cu], lay.e_fn[cu]);
            const Var s_v = tape.gather_rows(sv, lay.e_vn[cu]);
            if (plain) {
                const std::array<Var, 3> in{s_f, s_v, att_fv[cu]};
                msgs.push_back(nn::mlp_apply(tape, model.classes[cu].to_vn, tape.concat_cols(in)));
            } else {
                const std::array<Var, 2> in{s_f, s_v};
                msgs.push_back(tape.row_matvec(emat_fv[cu], nn::mlp_apply(tape, model.classes[cu].to_vn, tape.concat_cols(in))));
            }
        }
        if (!msgs.empty()) {
            const IndexList seg = active[0] && active[1] ? lay.seg_both : (active[0] ? lay.seg_det : lay.seg_chk);
            const Var agg = tape.segment_mean(tape.concat_rows(msgs), seg, nv);
            if (plain) {
                const std::array<Var, 3> in{sv, agg, att_v};
                sv = nn::mlp_apply(tape, model.vn, tape.concat_cols(in));
            } else {
                sv = tape.add(sv, agg);
            }
        }
        require_finite(tape.value(sv), "VN state");
        // VN → FN
        for (int c = 0; c < 2; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            if (!active[cu]) continue;
            const Var s_v = tape.gather_rows(sv, lay.e_vn[cu]);
            const Var s_f = tape.gather_rows(sf[cu], lay.e_fn[cu]);
            Var m;
            if (plain) {
                const std::array<Var, 3> in{s_v, s_f, att_vf[cu]};
                m = nn::mlp_apply(tape, model.classes[cu].to_fn, tape.concat_cols(in));
            } else {
                const std::array<Var, 2> in{s_v, s_f};
                m = tape.row_matvec(emat_vf[cu], nn::mlp_apply(tape, model.classes[cu].to_fn, tape.concat_cols(in)));
            }
            const Index nfc = B * lay.nf[cu];
            const Var agg = tape.segment_mean(m, lay.e_fn[cu], nfc);
            if (plain) {
                const std::array<Var, 3> in{sf[cu], agg, att_f[cu]};
                sf[cu] = nn::mlp_apply(tape, model.classes[cu].fn, tape.concat_cols(in));
            } else {
                sf[cu] = tape.add(sf[cu], agg);
            }
            require_finite(tape.value(sf[cu]), "FN state");
        }
        out.llrs.push_back(tape.matmul(tape.gather_rows(sv, lay.readout), readout));
    }
    return out;
}

namespace {

std::vector<LlrVector> run_single(const GnnModel& model, const BipartiteGraph& graph, const FrameInput& frame,
                                  const Schedule& schedule)
{
    nn::Tape tape(model.params());
    const auto pass = gnn_forward(tape, model, graph, std::span<const FrameInput>(&frame, 1), schedule);
    std::vector<LlrVector> out;
    for (const Var v : pass.llrs) {
        const Matrix& m = tape.value(v);
        LlrVector l;
        l.values.reserve(static_cast<std::size_t>(m.size()));
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index q = 0; q < m.cols(); ++q) l.values.push_back(saturate(m(r, q)));
        }
        out.push_back(std::move(l));
    }
    return out;
}

} // namespace

std::vector<LlrVector> gnn_detect(const GnnModel& model, const BipartiteGraph& graph, const FrameInput& frame,
                                  int iterations)
{
    if (graph.count_fn(FnClass::check) > 0) throw std::invalid_argument("gnn_detect expects a detection graph");
    return run_single(model, graph, frame, Schedule::flooding(iterations));
}

std::vector<LlrVector> jdd_infer(const GnnModel& model, const BipartiteGraph& joint_graph, const FrameInput& frame,
                                 const Schedule& schedule)
{
    return run_single(model, joint_graph, frame, schedule);
}

} // namespace gnnrx
