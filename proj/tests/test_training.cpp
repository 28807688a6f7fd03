#include "gnnrx/errors.hpp"
#include "gnnrx/metrics.hpp"
#include "gnnrx/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace gnnrx;

namespace {

GnnConfig micro(int memory, int nx)
{
    GnnConfig c;
    c.memory = memory;
    c.feature_size = 4;
    c.hidden_layers = 1;
    c.hidden_units = 16;
    c.num_symbols = nx;
    return c;
}

LinkSetup uncoded(const Cir& h, int nx)
{
    LinkSetup l;
    l.cir = h;
    l.num_symbols = nx;
    return l;
}

TrainConfig small(std::uint64_t seed)
{
    TrainConfig t;
    t.batch_size = 16;
    t.snr_min_db = 4.0;
    t.snr_max_db = 8.0;
    t.learning_rate = 1e-2;
    t.schedule = Schedule::flooding(2);
    t.seed = seed;
    return t;
}

bool same_params(const nn::ParameterSet& a, const nn::ParameterSet& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.value(i) != b.value(i)) return false;
    }
    return true;
}

} // namespace

TEST_CASE("bce loss against the direct formula")
{
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Bits bits;
    std::vector<double> q;
    double expected = 0.0;
    for (int i = 0; i < 100; ++i) {
        bits.push_back(u(rng) < 0.5);
        q.push_back(0.01 + 0.98 * u(rng));
        const double p1 = q.back();
        expected += bits.back() ? -std::log(p1) / std::log(2.0) : -std::log(1.0 - p1) / std::log(2.0);
    }
    CHECK(bce_loss(bits, q) == doctest::Approx(expected / 100.0).epsilon(1e-12));
    // Certain and wrong stays finite.
    const double capped = bce_loss(Bits{1}, std::vector<double>{0.0});
    CHECK(std::isfinite(capped));
    CHECK(capped == doctest::Approx(-std::log2(1e-12)));
    CHECK(bce_loss(Bits{0, 1}, std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(bce_loss(Bits{0}, std::vector<double>{0.5, 0.5}), ShapeError);
}

TEST_CASE("multi loss is the mean over iterations")
{
    CHECK(multi_loss(std::vector<double>{0.9, 0.5, 0.1}) == doctest::Approx(0.5));
    CHECK(multi_loss(std::vector<double>{0.3}) == doctest::Approx(0.3));
    CHECK_THROWS_AS(multi_loss(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("training configuration checks and presets")
{
    TrainConfig t;
    CHECK_NOTHROW(t.validate());
    t.snr_min_db = 15.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = TrainConfig{};
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = TrainConfig{};
    t.batch_size = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    const auto d = TrainConfig::paper_detection();
    CHECK(d.batch_size == 256);
    CHECK(d.epochs == 50000);
    CHECK(d.snr_min_db == 10.0);
    CHECK(d.snr_max_db == 14.0);
    const auto j = TrainConfig::paper_jdd();
    CHECK(j.epochs == 160000);
    CHECK(j.snr_max_db == 13.0);
    CHECK(j.schedule.str() == Schedule::flooding(10).str());
}

TEST_CASE("session rejects a model that does not fit the link")
{
    GnnModel m(micro(1, 8), 1);
    CHECK_THROWS_AS(TrainingSession(m, build_ffg(8, 1), uncoded(Cir{{1.0}}, 8), small(1)), ShapeError);
    GnnConfig q = micro(1, 8);
    q.modulation_order = 4;
    GnnModel mq(q, 1);
    CHECK_THROWS_AS(TrainingSession(mq, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(1)), ShapeError);
}

TEST_CASE("training lowers the loss on a memoryless channel")
{
    GnnModel m(micro(0, 8), 4);
    TrainConfig cfg = small(9);
    TrainingSession s(m, build_ffg(8, 0), uncoded(Cir{{1.0}}, 8), cfg);
    // Fixed evaluation batch, far from the training steps.
    const double before = s.evaluate(1'000'000, false, nullptr).loss;
    train(s, 2000, false);
    CHECK(s.steps_done() == 2000);
    const StepMetrics after = s.evaluate(1'000'000, false, nullptr);
    CHECK(after.loss < 0.8 * before);
    CHECK(after.bmi > 0.5);
}

TEST_CASE("equal seeds reproduce parameters bit for bit")
{
    GnnModel a(micro(1, 8), 3);
    GnnModel b(micro(1, 8), 3);
    TrainingSession sa(a, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(21));
    TrainingSession sb(b, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(21));
    std::vector<double> la, lb;
    train(sa, 4, false, [&](const StepMetrics& x) { la.push_back(x.loss); });
    train(sb, 4, false, [&](const StepMetrics& x) { lb.push_back(x.loss); });
    CHECK(la == lb);
    CHECK(same_params(a.params(), b.params()));

    GnnModel c(micro(1, 8), 3);
    TrainingSession sc(c, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(22));
    train(sc, 4, false);
    CHECK_FALSE(same_params(a.params(), c.params()));
}

TEST_CASE("batch seeds depend on seed and step only")
{
    GnnModel m(micro(0, 4), 1);
    TrainingSession s(m, build_ffg(4, 0), uncoded(Cir{{1.0}}, 4), small(5));
    CHECK(s.batch_seed(3) == s.batch_seed(3));
    CHECK(s.batch_seed(3) != s.batch_seed(4));
    const auto e1 = s.evaluate(2, false, nullptr);
    const auto e2 = s.evaluate(2, false, nullptr);
    CHECK(e1.loss == e2.loss);
    CHECK(e1.snr_db == e2.snr_db);
    CHECK(e1.snr_db >= 4.0);
    CHECK(e1.snr_db <= 8.0);
    CHECK(s.steps_done() == 0);
}

TEST_CASE("multi loss equals plain BCE with a single iteration")
{
    GnnModel m(micro(1, 8), 2);
    TrainConfig cfg = small(6);
    cfg.schedule = Schedule::flooding(1);
    cfg.loss = LossKind::multi;
    TrainingSession s1(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    cfg.loss = LossKind::bce;
    TrainingSession s2(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    CHECK(s1.evaluate(0, false, nullptr).loss == doctest::Approx(s2.evaluate(0, false, nullptr).loss).epsilon(1e-14));
    // With more iterations the two differ.
    cfg.schedule = Schedule::flooding(3);
    TrainingSession s3(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    cfg.loss = LossKind::multi;
    TrainingSession s4(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    CHECK(s3.evaluate(0, false, nullptr).loss != s4.evaluate(0, false, nullptr).loss);
}

TEST_CASE("Gaussian-prior pretraining")
{
    GnnConfig c = micro(1, 8);
    c.prior_embedding = true;
    GnnModel m(c, 8);
    TrainConfig cfg = small(4);
    cfg.fixed_ia = 0.0;
    TrainingSession s(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    // Zero-information priors are all-zero LLRs and leave the loss unchanged.
    const auto with = s.evaluate(0, true, nullptr);
    const auto without = s.evaluate(0, false, nullptr);
    CHECK(with.ia == 0.0);
    CHECK(with.loss == doctest::Approx(without.loss).epsilon(1e-14));

    cfg.fixed_ia.reset();
    cfg.ia_min = 0.6;
    cfg.ia_max = 0.9;
    TrainingSession p(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    std::vector<StepMetrics> log;
    train(p, 3, true, [&](const StepMetrics& x) { log.push_back(x); });
    REQUIRE(log.size() == 3);
    for (const auto& x : log) {
        CHECK(x.ia >= 0.6);
        CHECK(x.ia <= 0.9);
        CHECK(std::isfinite(x.loss));
    }
    // Strong priors make the task easier.
    const double informed = p.evaluate(50, true, nullptr).loss;
    const double blind = p.evaluate(50, false, nullptr).loss;
    CHECK(informed < blind);

    // Loss on a fixed batch falls over pretraining.
    const double start = p.evaluate(1'000'000, true, nullptr).loss;
    train(p, 2000, true);
    CHECK(p.evaluate(1'000'000, true, nullptr).loss < start);

    GnnModel plain(micro(1, 8), 8);
    TrainingSession q(plain, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(4));
    CHECK_THROWS_AS(gaussian_prior_pretrain_epoch(q), UnsupportedConfiguration);
}

TEST_CASE("pretraining with near-certain priors teaches the model to follow them")
{
    GnnConfig c = micro(1, 8);
    c.prior_embedding = true;
    GnnModel m(c, 12);
    TrainConfig cfg = small(14);
    cfg.snr_min_db = -10.0;
    cfg.snr_max_db = -10.0;
    cfg.fixed_ia = 0.99;
    TrainingSession s(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), cfg);
    train(s, 300, true);
    // At -10 dB the observation carries almost nothing; decisions must come from the priors.
    LinkSetup link = uncoded(Cir{{0.8, 0.6}}, 8);
    Rng rng(77);
    long long agree = 0, total = 0;
    for (int f = 0; f < 50; ++f) {
        LinkFrame fr = draw_frame(link, -10.0, rng);
        fr.rx.prior = sample_prior_llrs(fr.tx_bits, 0.99, rng);
        const Bits prior_hard = hard_decisions(fr.rx.prior->values);
        const Bits out = hard_decisions(gnn_detect(m, build_ffg(8, 1), fr.rx, 2).back().values);
        for (std::size_t i = 0; i < out.size(); ++i) agree += out[i] == prior_hard[i];
        total += static_cast<long long>(out.size());
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) > 0.98);
}

TEST_CASE("equal stages match one longer run")
{
    GnnModel a(micro(1, 8), 5);
    GnnModel b(micro(1, 8), 5);
    TrainingSession sa(a, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(13));
    TrainingSession sb(b, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(13));
    two_stage_finetune(sa, Schedule::flooding(2), 3, Schedule::flooding(2), 2);
    train(sb, 5, false);
    CHECK(same_params(a.params(), b.params()));
    // Shared weights admit a deeper unrolling than trained.
    Rng rng(1);
    const LinkFrame f = draw_frame(sa.link(), 6.0, rng);
    for (double v : gnn_detect(a, sa.graph(), f.rx, 20).back().values) CHECK(std::isfinite(v));
}

TEST_CASE("two-stage finetuning continues one optimiser")
{
    GnnModel m(micro(1, 8), 5);
    TrainingSession s(m, build_ffg(8, 1), uncoded(Cir{{0.8, 0.6}}, 8), small(13));
    std::vector<long long> steps;
    two_stage_finetune(s, Schedule::flooding(2), 2, Schedule::flooding(4), 3,
                       [&](const StepMetrics& x) { steps.push_back(x.step); });
    CHECK(steps == std::vector<long long>{0, 1, 2, 3, 4});
    CHECK(s.steps_done() == 5);
    CHECK(s.config().schedule.str() == Schedule::flooding(4).str());
    CHECK(s.adam().step_count == 5);
}

TEST_CASE("joint training step on a short code")
{
    LinkSetup link;
    link.cir = Cir{{0.8, 0.6}};
    link.attach_code(std::make_shared<const ParityCheckMatrix>(load_alist_file("data/codes/ira_132_66.alist")), 3);
    GnnConfig c = micro(1, link.symbols());
    c.check_nodes = true;
    GnnModel m(c, 2);
    TrainConfig cfg = small(1);
    cfg.batch_size = 4;
    cfg.schedule = Schedule::sequential(2, 1, 1);
    const BipartiteGraph g = build_link_graph(link, DetectionGraphKind::ffg, true);
    CHECK(g.readout_vns.size() == 132);
    TrainingSession s(m, g, link, cfg);
    const StepMetrics x = train_epoch(s);
    CHECK(std::isfinite(x.loss));
    CHECK(x.bmi >= 0.0);
    CHECK(s.steps_done() == 1);
}
