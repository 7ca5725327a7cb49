#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "trajlab/errors.hpp"
#include "trajlab/eval.hpp"
#include "trajlab/synthetic.hpp"

using namespace trajlab;

namespace {

std::vector<TrackWindow> corpus(std::size_t pred_len, std::size_t tracks = 6) {
    return generate_windows(SyntheticConfig{.tracks = tracks, .length = 8 + pred_len + 2, .noise_std = 0.01, .seed = 2},
                            8, pred_len);
}

ForecastModel model(Architecture arch, HeadKind head) {
    ModelConfig c = ModelConfig::desk(arch, head);
    c.d_model = 16;
    c.layers = 1;
    c.num_classes = 8;
    c.seed = 7;
    std::optional<MotionCodebook> cb;
    if (head == HeadKind::quantized) {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<Vec2> pts(100);
        for (auto& p : pts) p = {n(rng), n(rng)};
        cb = MotionCodebook::fit(pts, 8, 1);
    }
    return ForecastModel(c, NormStats{{0.3, 0.0}, {0.2, 0.2}}, cb);
}

Displacement brute_force(const std::vector<Vec2>& p, const std::vector<Vec2>& t) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double dx = p[i].x - t[i].x, dy = p[i].y - t[i].y;
        sum += std::sqrt(dx * dx + dy * dy);
    }
    const double dx = p.back().x - t.back().x, dy = p.back().y - t.back().y;
    return {static_cast<double>(sum / p.size()), std::sqrt(dx * dx + dy * dy)};
}

}  // namespace

TEST(MadFad, IdenticalPathsGiveZero) {
    const std::vector<Vec2> p{{1, 2}, {3, 4}};
    const auto d = mad_fad(p, p);
    EXPECT_EQ(d.mad, 0.0);
    EXPECT_EQ(d.fad, 0.0);
}

TEST(MadFad, ConstantOffsetIsThreeFourFive) {
    std::vector<Vec2> t(12), p(12);
    for (std::size_t i = 0; i < 12; ++i) {
        t[i] = {0.1 * static_cast<double>(i), -0.2 * static_cast<double>(i)};
        p[i] = t[i] + Vec2{0.3, 0.4};
    }
    const auto d = mad_fad(p, t);
    EXPECT_NEAR(d.mad, 0.5, 1e-12);
    EXPECT_NEAR(d.fad, 0.5, 1e-12);
}

TEST(MadFad, MatchesBruteForceOnRandomInstances) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10, 10);
    std::uniform_int_distribution<std::size_t> len(1, 40);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len(rng);
        std::vector<Vec2> p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = {u(rng), u(rng)};
            t[i] = {u(rng), u(rng)};
        }
        const auto a = mad_fad(p, t), b = brute_force(p, t);
        EXPECT_NEAR(a.mad, b.mad, 1e-12);
        EXPECT_NEAR(a.fad, b.fad, 1e-12);
        EXPECT_GE(a.mad, 0.0);
        EXPECT_GE(a.fad, 0.0);
    }
}

TEST(MadFad, LengthMismatchIsShapeError) {
    const std::vector<Vec2> a{{0, 0}}, b{{0, 0}, {1, 1}};
    EXPECT_THROW(mad_fad(a, b), ShapeError);
    EXPECT_THROW(mad_fad({}, {}), ShapeError);
}

TEST(Decoding, RegressiveDeterministicIgnoresSeed) {
    const auto m = model(Architecture::tf, HeadKind::regressive);
    const auto w = corpus(12).front();
    EXPECT_EQ(m.forecast(w, {.seed = 1}).positions, m.forecast(w, {.seed = 99}).positions);
}

TEST(Decoding, QuantizedDeterministicIsArgmaxChain) {
    const auto m = model(Architecture::tf, HeadKind::quantized);
    const auto w = corpus(12).front();
    const auto r = m.forecast(w, {});
    Vec2 pos = last_observed_position(to_representation(w, Representation::speeds));
    for (std::size_t j = 0; j < 12; ++j) {
        const auto& probs = r.class_probs[j];
        const std::size_t argmax = std::max_element(probs.begin(), probs.end()) - probs.begin();
        EXPECT_EQ(r.classes[j], argmax);
        pos += m.norm_stats().invert(m.codebook()->dequantize(argmax));
        EXPECT_NEAR(r.positions[j].x, pos.x, 1e-12);
        EXPECT_NEAR(r.positions[j].y, pos.y, 1e-12);
    }
}

TEST(Decoding, LongerHorizonThanTrainingLength) {
    for (auto arch : {Architecture::lstm, Architecture::tf, Architecture::bert_ar, Architecture::bert_os}) {
        const auto m = model(arch, HeadKind::regressive);
        const auto w = corpus(32).front();
        EXPECT_EQ(m.forecast(w, {.pred_len = 32}).positions.size(), 32u);
    }
}

TEST(Decoding, OracleReportsEmittedEndpoint) {
    ModelConfig c = ModelConfig::desk(Architecture::bert_os, HeadKind::regressive);
    c.d_model = 16;
    c.layers = 1;
    c.representation = Representation::relative_positions;
    c.oracle_endpoint = true;
    const ForecastModel m(c, NormStats{{0, 0}, {3, 3}});
    const auto w = corpus(12).front();
    const auto r = m.forecast(w, {.oracle_endpoint = true});
    ASSERT_EQ(r.positions.size(), 12u);
    EXPECT_EQ(*r.given_endpoint, w.future.back());
    EXPECT_GT(mad_fad(r.positions, true_future(w)).fad, 0.0);
}

TEST(BestOfN, OneSampleEqualsSingleSampledDecode) {
    const auto m = model(Architecture::tf, HeadKind::gaussian);
    const auto w = corpus(12).front();
    const auto best = best_of_n(m, w, 1, 42, BestOfSelection::min_mad, 1.0, 3);
    const std::uint64_t seed = sample_seed(42, 3, 0);
    const auto single = m.forecast(std::span<const TrackWindow>(&w, 1), {.mode = DecodeMode::sampled},
                                   std::span<const std::uint64_t>(&seed, 1));
    const auto d = mad_fad(single.front().positions, true_future(w));
    EXPECT_EQ(best.error.mad, d.mad);
    EXPECT_EQ(best.error.fad, d.fad);
}

TEST(BestOfN, MonotoneAndNestedInN) {
    for (auto head : {HeadKind::gaussian, HeadKind::quantized}) {
        const auto m = model(Architecture::tf, head);
        for (const auto& w : corpus(12, 3)) {
            const auto full = best_of_n(m, w, 20, 5);
            double prev = INFINITY;
            for (std::size_t n : {1u, 2u, 5u, 10u, 20u}) {
                const auto r = best_of_n(m, w, n, 5);
                const auto prefix = select_best(full.samples, BestOfSelection::min_mad, n);
                EXPECT_EQ(r.error.mad, prefix.error.mad);
                EXPECT_LE(r.error.mad, prev);
                prev = r.error.mad;
            }
        }
    }
}

TEST(BestOfN, SelectionModes) {
    const std::vector<Displacement> s{{1.0, 0.2}, {0.5, 0.9}, {0.7, 0.4}};
    const auto a = select_best(s, BestOfSelection::min_mad);
    EXPECT_EQ(a.winner_mad, 1u);
    EXPECT_EQ(a.error.mad, 0.5);
    EXPECT_EQ(a.error.fad, 0.9);
    const auto b = select_best(s, BestOfSelection::per_metric);
    EXPECT_EQ(b.error.mad, 0.5);
    EXPECT_EQ(b.error.fad, 0.2);
    EXPECT_EQ(b.winner_fad, 0u);
    EXPECT_THROW(select_best({}, BestOfSelection::min_mad), ConfigError);
}

TEST(Evaluate, ConstantVelocityIsExactOnStraightLines) {
    auto ws = generate_windows(SyntheticConfig{.tracks = 5, .length = 20, .line_fraction = 1.0, .seed = 3}, 8, 12);
    const auto row = evaluate_constant_velocity(ws, 12, "lines");
    EXPECT_EQ(row.count, ws.size());
    EXPECT_NEAR(row.mad, 0.0, 1e-9);
    EXPECT_NEAR(row.fad, 0.0, 1e-9);
    EXPECT_EQ(row.config, "constant_velocity");
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
    const auto ws = corpus(12, 10);
    const auto m = model(Architecture::tf, HeadKind::gaussian);
    EvalOptions o;
    o.decode.seed = 9;
    o.chunk = 3;
    o.n_samples = 4;
    o.threads = 1;
    const auto a = window_errors(m, ws, o);
    o.threads = 4;
    const auto b = window_errors(m, ws, o);
    o.n_samples = 1;
    o.decode.mode = DecodeMode::sampled;
    const auto c = window_errors(m, ws, o);
    o.threads = 1;
    const auto d = window_errors(m, ws, o);
    for (std::size_t i = 0; i < ws.size(); ++i) {
        EXPECT_EQ(a[i].mad, b[i].mad);
        EXPECT_EQ(c[i].mad, d[i].mad);
    }
}

TEST(Evaluate, RowAveragesWindowErrors) {
    const auto ws = corpus(12, 5);
    const auto m = model(Architecture::lstm, HeadKind::regressive);
    const auto errs = window_errors(m, ws, {});
    const auto row = evaluate(m, ws, {}, "set", "lstm");
    double mad = 0.0, fad = 0.0;
    for (const auto& e : errs) {
        mad += e.mad;
        fad += e.fad;
    }
    EXPECT_NEAR(row.mad, mad / errs.size(), 1e-12);
    EXPECT_NEAR(row.fad, fad / errs.size(), 1e-12);
    EXPECT_EQ(row.count, ws.size());
    EXPECT_EQ(row.horizon, 12u);
}

TEST(HorizonSweep, OneRowPerHorizonOnEligibleWindows) {
    auto ws = corpus(32, 4);
    auto shorter = corpus(20, 2);
    const auto m = model(Architecture::tf, HeadKind::regressive);
    std::vector<TrackWindow> mixed = ws;
    for (auto& w : shorter) mixed.push_back(w);
    const auto rep = horizon_sweep(m, mixed, kStandardHorizons, {}, "zara2", "tf");
    ASSERT_EQ(rep.rows.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(rep.rows[i].horizon, kStandardHorizons[i]);
        EXPECT_EQ(rep.rows[i].count, ws.size());
    }
    std::vector<TrackWindow> at12;
    for (const auto& w : ws) at12.push_back(truncate_future(w, 12));
    const auto standard = evaluate(m, at12, {});
    EXPECT_EQ(rep.rows[0].mad, standard.mad);
    EXPECT_EQ(rep.rows[0].fad, standard.fad);
}

TEST(MissingData, EmptyPatternEqualsStandard) {
    const auto ws = corpus(12, 5);
    const auto m = model(Architecture::tf, HeadKind::regressive);
    const auto a = evaluate_with_missing(m, ws, {}, {});
    const auto b = evaluate(m, ws, {});
    EXPECT_EQ(a.mad, b.mad);
    EXPECT_EQ(a.fad, b.fad);
}

TEST(MissingData, DroppingStepsKeepsGroundTruthAndLength) {
    const auto ws = corpus(12, 3);
    for (auto arch : {Architecture::lstm, Architecture::tf, Architecture::bert_os}) {
        const auto m = model(arch, HeadKind::regressive);
        const std::size_t drop[] = {0, 5};
        const auto row = evaluate_with_missing(m, ws, drop, {});
        EXPECT_EQ(row.count, ws.size());
        EXPECT_TRUE(std::isfinite(row.mad));
        auto w = ws.front();
        w.valid_mask[0] = false;
        w.valid_mask[5] = false;
        EXPECT_EQ(m.forecast(w, {}).positions.size(), 12u);
        EXPECT_EQ(true_future(w), true_future(ws.front()));
    }
    const std::size_t bad[] = {8};
    EXPECT_THROW(evaluate_with_missing(model(Architecture::tf, HeadKind::regressive), ws, bad, {}), ConfigError);
}

TEST(MetricsReport, AverageAndSerialisation) {
    MetricsReport rep;
    rep.rows.push_back({"eth", "tf", 12, 1, 10, 1.0, 2.0});
    rep.rows.push_back({"hotel", "tf", 12, 1, 30, 0.5, 1.0});
    rep.append_average();
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.rows[2].dataset, "Avg");
    EXPECT_DOUBLE_EQ(rep.rows[2].mad, 0.75);
    EXPECT_DOUBLE_EQ(rep.rows[2].fad, 1.5);
    EXPECT_EQ(rep.rows[2].count, 40u);
    const auto j = nlohmann::json::parse(rep.to_json());
    EXPECT_EQ(j.at("rows").size(), 3u);
    EXPECT_EQ(j.at("rows")[1].at("dataset"), "hotel");
    const std::string table = rep.to_table();
    EXPECT_EQ(table.substr(0, table.find('\n')), "dataset,config,horizon,n_samples,count,mad,fad");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}
