#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "trajlab/data.hpp"
#include "trajlab/errors.hpp"
#include "trajlab/synthetic.hpp"
#include "trajlab/window_cache.hpp"

using namespace trajlab;

namespace {

std::vector<Trajectory> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_dataset(in, "mem", "scene");
}

Trajectory line_track(std::size_t n, Vec2 start = {}, Vec2 step = {0.4, 0.1}) {
    Trajectory t;
    t.scene_id = "s";
    t.pedestrian_id = 1;
    for (std::size_t i = 0; i < n; ++i) {
        t.frames.push_back(static_cast<std::int64_t>(i) * 10);
        t.positions.push_back(start + step * static_cast<double>(i));
    }
    return t;
}

std::vector<TrackWindow> random_windows(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<TrackWindow> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Vec2> pts;
        for (int t = 0; t < 20; ++t) pts.push_back({u(rng), u(rng)});
        out.push_back(to_representation(pts, 8, Representation::absolute));
    }
    return out;
}

}  // namespace

TEST(ParseDataset, TwoLinesGiveOneTrajectory) {
    const auto t = parse("0 1 0.0 0.0\n10 1 0.4 0.0\n");
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].size(), 2u);
    EXPECT_EQ(t[0].pedestrian_id, 1);
    EXPECT_EQ(t[0].positions[1], (Vec2{0.4, 0.0}));
}

TEST(ParseDataset, LineOrderDoesNotMatter) {
    const std::string a = "0 1 0 0\n10 1 1 0\n20 1 2 0\n0 2 5 5\n10 2 5 6\n";
    const std::string b = "10 2 5 6\n20 1 2 0\n0 2 5 5\n0 1 0 0\n10 1 1 0\n";
    const auto ta = parse(a), tb = parse(b);
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        EXPECT_EQ(ta[i].pedestrian_id, tb[i].pedestrian_id);
        EXPECT_EQ(ta[i].frames, tb[i].frames);
        EXPECT_EQ(ta[i].positions, tb[i].positions);
    }
}

TEST(ParseDataset, NonNumericFieldNamesLineAndField) {
    try {
        parse("10 1 abc 0.0\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_EQ(e.field(), 3u);
        EXPECT_EQ(e.file(), "mem");
    }
}

TEST(ParseDataset, EmptyInputGivesNoTrajectories) {
    EXPECT_TRUE(parse("").empty());
    EXPECT_TRUE(parse("# comment only\n\n").empty());
}

TEST(ParseDataset, WrongFieldCountIsParseError) {
    EXPECT_THROW(parse("0 1 2\n"), ParseError);
    EXPECT_THROW(parse("0 1 2 3 4\n"), ParseError);
}

TEST(ParseDataset, WriteThenReadRoundTrips) {
    const auto tracks = generate_tracks(SyntheticConfig{.tracks = 5, .length = 12, .seed = 3});
    const auto path = std::filesystem::temp_directory_path() / "trajlab_test_roundtrip.txt";
    write_dataset(path, tracks);
    const auto back = parse_dataset(path);
    std::filesystem::remove(path);
    ASSERT_EQ(back.size(), tracks.size());
    for (std::size_t i = 0; i < back.size(); ++i)
        for (std::size_t j = 0; j < back[i].size(); ++j) {
            EXPECT_NEAR(back[i].positions[j].x, tracks[i].positions[j].x, 1e-12);
            EXPECT_NEAR(back[i].positions[j].y, tracks[i].positions[j].y, 1e-12);
        }
}

TEST(ExtractWindows, CountFollowsTheFormula) {
    EXPECT_EQ(extract_windows(line_track(20), 8, 12).size(), 1u);
    EXPECT_EQ(extract_windows(line_track(25), 8, 12).size(), 6u);
    EXPECT_EQ(extract_windows(line_track(19), 8, 12).size(), 0u);
    EXPECT_EQ(extract_windows(line_track(30), 8, 12, 3).size(), 4u);
    EXPECT_THROW(extract_windows(line_track(30), 8, 12, 0), ConfigError);
}

TEST(ExtractWindows, WindowsAreConsecutivePoints) {
    const auto t = line_track(23);
    const auto w = extract_windows(t, 8, 12);
    for (std::size_t s = 0; s < w.size(); ++s) {
        ASSERT_EQ(w[s].obs_len(), 8u);
        ASSERT_EQ(w[s].pred_len(), 12u);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(w[s].observed[i], t.positions[s + i]);
        for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(w[s].future[i], t.positions[s + 8 + i]);
        EXPECT_EQ(w[s].valid_mask, std::vector<bool>(8, true));
    }
}

TEST(ExtractWindows, TranslationEquivariant) {
    const Vec2 shift{3.25, -7.5};
    const auto a = extract_windows(line_track(24), 8, 12);
    const auto b = extract_windows(line_track(24, shift), 8, 12);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        const auto pa = decode_positions(a[s]), pb = decode_positions(b[s]);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            EXPECT_NEAR(pb[i].x - pa[i].x, shift.x, 1e-12);
            EXPECT_NEAR(pb[i].y - pa[i].y, shift.y, 1e-12);
        }
    }
}

TEST(Representation, SpeedsOfAStraightLine) {
    const std::vector<Vec2> p{{0, 0}, {1, 0}, {2, 0}};
    const auto w = to_representation(p, 2, Representation::speeds);
    EXPECT_EQ(w.observed[0], (Vec2{0, 0}));
    EXPECT_EQ(w.observed[1], (Vec2{1, 0}));
    EXPECT_EQ(w.future[0], (Vec2{1, 0}));
}

TEST(Representation, RelativePositionsOfAStraightLine) {
    const std::vector<Vec2> p{{0, 0}, {1, 0}, {2, 0}};
    const auto w = to_representation(p, 2, Representation::relative_positions);
    EXPECT_EQ(w.values(), p);
}

TEST(Representation, SpeedsDecodeFromTheOrigin) {
    const std::vector<Vec2> p{{5, 5}, {6, 5}, {7, 5}};
    const auto w = to_representation(p, 2, Representation::speeds);
    EXPECT_EQ(w.origin, (Vec2{5, 5}));
    EXPECT_EQ(decode_positions(w), p);
}

TEST(Representation, RoundTripIsExactForAllModes) {
    for (const auto& w : random_windows(50, 11))
        for (auto mode : {Representation::absolute, Representation::speeds, Representation::relative_positions}) {
            const auto enc = to_representation(w, mode);
            EXPECT_EQ(enc.representation, mode);
            const auto raw = decode_positions(w);
            const auto dec = decode_positions(enc);
            ASSERT_EQ(raw.size(), dec.size());
            for (std::size_t i = 0; i < raw.size(); ++i) {
                EXPECT_NEAR(dec[i].x, raw[i].x, 1e-12);
                EXPECT_NEAR(dec[i].y, raw[i].y, 1e-12);
            }
        }
}

TEST(Representation, DecodeFutureStartsFromLastObserved) {
    const auto w = to_representation(random_windows(1, 3)[0], Representation::speeds);
    const std::vector<Vec2> steps{{1, 0}, {0, 1}};
    const auto out = decode_future(w, steps);
    const Vec2 last = last_observed_position(w);
    EXPECT_NEAR(out[0].x, last.x + 1, 1e-12);
    EXPECT_NEAR(out[1].y, last.y + 1, 1e-12);
}

TEST(Representation, ParseNames) {
    EXPECT_EQ(parse_representation("speeds"), Representation::speeds);
    EXPECT_EQ(parse_representation(to_string(Representation::relative_positions)), Representation::relative_positions);
    EXPECT_THROW(parse_representation("velocity"), ConfigError);
}

TEST(Normalization, ConstantSpeedsUseTheFloor) {
    const std::vector<Vec2> v(10, Vec2{1, 0});
    const auto s = fit_normalization(v);
    EXPECT_EQ(s.std.x, kStdFloor);
    EXPECT_EQ(s.std.y, kStdFloor);
    for (const auto& x : v) EXPECT_EQ(s.apply(x), (Vec2{0, 0}));
    EXPECT_EQ(s.invert(s.apply(Vec2{1, 0})), (Vec2{1, 0}));
}

TEST(Normalization, TwoPointPopulationStatistics) {
    const std::vector<Vec2> v{{0, 0}, {2, 0}};
    const auto s = fit_normalization(v);
    EXPECT_DOUBLE_EQ(s.mean.x, 1.0);
    EXPECT_DOUBLE_EQ(s.mean.y, 0.0);
    EXPECT_DOUBLE_EQ(s.std.x, 1.0);
    EXPECT_DOUBLE_EQ(s.std.y, kStdFloor);
}

TEST(Normalization, ApplyThenInvertIsIdentity) {
    std::vector<TrackWindow> ws;
    for (const auto& w : random_windows(30, 5)) ws.push_back(to_representation(w, Representation::speeds));
    const auto s = fit_normalization(ws);
    for (const auto& w : ws) {
        const auto back = invert_normalization(apply_normalization(w, s), s);
        const auto a = w.values(), b = back.values();
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i].x, b[i].x, 1e-12);
            EXPECT_NEAR(a[i].y, b[i].y, 1e-12);
        }
    }
}

TEST(Normalization, RefitOnNormalizedDataIsStandard) {
    std::vector<TrackWindow> ws;
    for (const auto& w : random_windows(40, 6)) ws.push_back(to_representation(w, Representation::speeds));
    const auto s = fit_normalization(ws);
    std::vector<TrackWindow> normed;
    for (const auto& w : ws) normed.push_back(apply_normalization(w, s));
    const auto r = fit_normalization(normed);
    EXPECT_NEAR(r.mean.x, 0.0, 1e-9);
    EXPECT_NEAR(r.mean.y, 0.0, 1e-9);
    EXPECT_NEAR(r.std.x, 1.0, 1e-9);
    EXPECT_NEAR(r.std.y, 1.0, 1e-9);
}

TEST(Normalization, EmptyOrNonFiniteInputIsDataError) {
    EXPECT_THROW(fit_normalization(std::span<const Vec2>{}), DataError);
    const std::vector<Vec2> bad{{0, 0}, {NAN, 1}};
    EXPECT_THROW(fit_normalization(bad), DataError);
}

TEST(Augmentation, UnitScaleLeavesWindowUnchanged) {
    const auto w = random_windows(1, 8)[0];
    EXPECT_EQ(scale_window(w, 1.0).values(), w.values());
}

TEST(Augmentation, DoubleScaleDoublesSpeeds) {
    const std::vector<Vec2> p{{0, 0}, {1, 0}, {2, 0}};
    const auto w = to_representation(scale_window(to_representation(p, 2, Representation::absolute), 2.0),
                                     Representation::speeds);
    EXPECT_EQ(w.observed[1], (Vec2{2, 0}));
}

TEST(Augmentation, KeepsOriginalsAndIsSeeded) {
    const auto ws = random_windows(20, 9);
    const auto a = augment_scale(ws, 0.5, 2.0, 42), b = augment_scale(ws, 0.5, 2.0, 42);
    ASSERT_EQ(a.size(), 40u);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a[i].values(), ws[i].values());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values(), b[i].values());
    for (std::size_t i = 0; i < 20; ++i) {
        const auto orig = ws[i].values(), aug = a[20 + i].values();
        const double s = aug[5].x / orig[5].x;
        EXPECT_GE(s, 0.5);
        EXPECT_LE(s, 2.0);
        for (std::size_t t = 0; t < orig.size(); ++t) {
            EXPECT_NEAR(aug[t].x, s * orig[t].x, 1e-9);
            EXPECT_NEAR(aug[t].y, s * orig[t].y, 1e-9);
        }
    }
    EXPECT_THROW(augment_scale(ws, 0.0, 2.0, 1), ConfigError);
}

TEST(Canonicalize, ThreeFourFiveExample) {
    std::vector<Vec2> p(20, Vec2{2, 2});
    p[0] = {1, 1};
    p[7] = {4, 5};
    const auto c = canonicalize(to_representation(p, 8, Representation::absolute));
    EXPECT_NEAR(c.window.observed[0].x, 0.0, 1e-12);
    EXPECT_NEAR(c.window.observed[0].y, 0.0, 1e-12);
    EXPECT_NEAR(c.window.observed[7].x, 5.0, 1e-12);
    EXPECT_NEAR(c.window.observed[7].y, 0.0, 1e-12);
    EXPECT_FALSE(c.transform.degenerate);
}

TEST(Canonicalize, CanonicalWindowHasIdentityTransform) {
    std::vector<Vec2> p(20);
    for (std::size_t i = 0; i < 20; ++i) p[i] = {0.5 * static_cast<double>(i), 0.0};
    const auto c = canonicalize(to_representation(p, 8, Representation::absolute));
    EXPECT_NEAR(c.transform.cos_theta, 1.0, 1e-15);
    EXPECT_NEAR(c.transform.sin_theta, 0.0, 1e-15);
    EXPECT_NEAR(c.transform.translation.x, 0.0, 1e-15);
}

TEST(Canonicalize, InverseRestoresAndDistancesArePreserved) {
    for (const auto& w : random_windows(30, 12)) {
        const auto c = canonicalize(w);
        const auto back = decode_positions(uncanonicalize(c.window, c.transform));
        const auto raw = decode_positions(w), canon = decode_positions(c.window);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            EXPECT_NEAR(back[i].x, raw[i].x, 1e-10);
            EXPECT_NEAR(back[i].y, raw[i].y, 1e-10);
            for (std::size_t j = i + 1; j < raw.size(); ++j)
                EXPECT_NEAR(distance(canon[i], canon[j]), distance(raw[i], raw[j]), 1e-10);
        }
    }
}

TEST(Canonicalize, CoincidentEndpointsTranslateOnly) {
    std::vector<Vec2> p(20, Vec2{3, 4});
    p[3] = {5, 5};
    const auto c = canonicalize(to_representation(p, 8, Representation::absolute));
    EXPECT_TRUE(c.transform.degenerate);
    EXPECT_EQ(c.transform.cos_theta, 1.0);
    EXPECT_EQ(c.transform.sin_theta, 0.0);
    EXPECT_NEAR(c.window.observed[3].x, 2.0, 1e-12);
    EXPECT_NEAR(c.window.observed[3].y, 1.0, 1e-12);
}

TEST(LeaveOneOut, EachSetIsTestedOnceAndDisjointFromTrain) {
    std::vector<NamedDataset> sets;
    std::uint64_t id = 0;
    for (const char* name : {"eth", "hotel", "univ", "zara1", "zara2"}) {
        NamedDataset d{name, random_windows(3, id)};
        for (auto& w : d.windows) {
            w.scene_id = name;
            w.window_id = id++;
        }
        sets.push_back(std::move(d));
    }
    const auto folds = loo_splits(sets);
    ASSERT_EQ(folds.size(), 5u);
    std::set<std::string> tested;
    std::set<std::uint64_t> all_test_ids;
    for (const auto& f : folds) {
        tested.insert(f.test_name);
        EXPECT_EQ(f.train_names.size(), 4u);
        EXPECT_EQ(f.train.size(), 12u);
        for (const auto& w : f.train) EXPECT_NE(w.scene_id, f.test_name);
        for (const auto& w : f.test) {
            EXPECT_EQ(w.scene_id, f.test_name);
            all_test_ids.insert(w.window_id);
        }
    }
    EXPECT_EQ(tested.size(), 5u);
    EXPECT_EQ(all_test_ids.size(), 15u);
}

TEST(WindowCache, SaveLoadRoundTrip) {
    WindowCache cache;
    cache.scenes = {"a", "b"};
    auto ws = generate_windows(SyntheticConfig{.tracks = 4, .length = 22, .seed = 2}, 8, 12);
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i].scene_id = i % 2 ? "b" : "a";
    ws[0].valid_mask[2] = false;
    cache.windows = ws;
    const auto path = std::filesystem::temp_directory_path() / "trajlab_test_cache.bin";
    save_window_cache(path, cache);
    const auto back = load_window_cache(path);
    EXPECT_TRUE(std::filesystem::exists(manifest_path(path)));
    std::filesystem::remove(path);
    std::filesystem::remove(manifest_path(path));
    ASSERT_EQ(back.windows.size(), ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        EXPECT_EQ(back.windows[i].values(), ws[i].values());
        EXPECT_EQ(back.windows[i].valid_mask, ws[i].valid_mask);
        EXPECT_EQ(back.windows[i].scene_id, ws[i].scene_id);
        EXPECT_EQ(back.windows[i].window_id, ws[i].window_id);
    }
    EXPECT_EQ(back.by_scene().size(), 2u);
}
