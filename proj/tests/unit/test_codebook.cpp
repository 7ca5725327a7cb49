#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "trajlab/codebook.hpp"
#include "trajlab/errors.hpp"

using namespace trajlab;

namespace {

std::vector<Vec2> uniform_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec2> p(n);
    for (auto& v : p) v = {u(rng), u(rng)};
    return p;
}

}  // namespace

TEST(KMeans, KPointsKClustersIsExact) {
    const auto pts = uniform_points(6, 1);
    const auto r = kmeans(pts, {.k = 6, .seed = 3});
    EXPECT_EQ(r.inertia, 0.0);
    for (const auto& p : pts) {
        const auto c = r.centroids[nearest_centroid(r.centroids, p)];
        EXPECT_EQ(c, p);
    }
}

TEST(KMeans, TwoBlobsRecoverTheirMeans) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.1);
    std::vector<Vec2> pts;
    Vec2 m0{}, m1{};
    for (int i = 0; i < 200; ++i) {
        const Vec2 a{-3 + n(rng), n(rng)}, b{3 + n(rng), 1 + n(rng)};
        pts.push_back(a);
        pts.push_back(b);
        m0 += a * (1.0 / 200);
        m1 += b * (1.0 / 200);
    }
    const auto r = kmeans(pts, {.k = 2, .seed = 1});
    const Vec2 c0 = r.centroids[nearest_centroid(r.centroids, m0)];
    const Vec2 c1 = r.centroids[nearest_centroid(r.centroids, m1)];
    EXPECT_LT(distance(c0, m0), 0.3);
    EXPECT_LT(distance(c1, m1), 0.3);
    EXPECT_NE(c0, c1);
}

TEST(KMeans, SameSeedIsBitIdentical) {
    const auto pts = uniform_points(500, 2);
    const auto a = kmeans(pts, {.k = 16, .seed = 9}), b = kmeans(pts, {.k = 16, .seed = 9});
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, InertiaIsNonIncreasing) {
    const auto pts = uniform_points(800, 3);
    const auto r = kmeans(pts, {.k = 20, .seed = 4});
    ASSERT_FALSE(r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
        EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] * (1 + 1e-12));
    EXPECT_LE(r.inertia, lloyd_iteration_inertia(pts, r.centroids) * (1 + 1e-12));
}

TEST(KMeans, LargerKNeverIncreasesInertia) {
    const auto pts = uniform_points(1000, 4);
    double prev = INFINITY;
    for (std::size_t k : {8u, 16u, 32u}) {
        const auto r = kmeans(pts, {.k = k, .seed = 5});
        EXPECT_LE(r.inertia, prev);
        prev = r.inertia;
    }
}

TEST(KMeans, TooFewDistinctPointsIsFitError) {
    const std::vector<Vec2> pts{{0, 0}, {0, 0}, {1, 1}};
    EXPECT_THROW(kmeans(pts, {.k = 3}), FitError);
    EXPECT_EQ(count_distinct(pts), 2u);
}

TEST(MotionCodebook, CentroidsAreDistinctAndQuantizeIsInRange) {
    const auto pts = uniform_points(600, 5);
    const auto cb = MotionCodebook::fit(pts, 32, 11);
    EXPECT_EQ(cb.size(), 32u);
    EXPECT_EQ(count_distinct(cb.centroids()), 32u);
    for (const auto& p : pts) EXPECT_LT(cb.quantize(p), 32u);
}

TEST(MotionCodebook, CentroidQuantizesToItself) {
    const auto cb = MotionCodebook::fit(uniform_points(400, 6), 16, 2);
    for (std::size_t k = 0; k < cb.size(); ++k) {
        EXPECT_EQ(cb.quantize(cb.centroids()[k]), k);
        EXPECT_EQ(cb.dequantize(cb.quantize(cb.centroids()[k])), cb.centroids()[k]);
    }
}

TEST(MotionCodebook, RoundTripErrorIsBoundedByTrainingRadius) {
    const auto train = uniform_points(500, 7);
    const auto cb = MotionCodebook::fit(train, 24, 3);
    double bound = 0.0;
    for (const auto& p : train) bound = std::max(bound, distance(p, cb.dequantize(cb.quantize(p))));
    for (const auto& p : train) EXPECT_LE(distance(p, cb.dequantize(cb.quantize(p))), bound);
}

TEST(MotionCodebook, TiesGoToTheLowestIndex) {
    std::vector<Vec2> c{{10, 10}, {20, 20}, {-1, 0}, {30, 30}, {40, 40}, {1, 0}};
    MotionCodebook cb(c);
    EXPECT_EQ(cb.quantize({0, 0}), 2u);
    EXPECT_EQ(cb.quantize({-1, 0}), 2u);
}

TEST(MotionCodebook, OutOfRangeIndexIsLookupError) {
    MotionCodebook cb({{0, 0}, {1, 1}});
    EXPECT_THROW(cb.dequantize(2), LookupError);
    EXPECT_THROW(MotionCodebook({{0, 0}, {0, 0}}), FitError);
}

TEST(SampleClass, DominantLogitWinsAlmostAlways) {
    std::mt19937_64 rng(1);
    const std::vector<double> logits{0, 0, 100, 0};
    int hits = 0;
    for (int i = 0; i < 10000; ++i) hits += sample_class(logits, 1.0, rng) == 2;
    EXPECT_GT(hits / 10000.0, 0.999);
}

TEST(SampleClass, UniformLogitsGiveUniformFrequencies) {
    std::mt19937_64 rng(2);
    const std::vector<double> logits(4, 0.5);
    std::vector<int> count(4);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++count[sample_class(logits, 1.0, rng)];
    for (int c : count) EXPECT_NEAR(c / static_cast<double>(n), 0.25, 0.02);
}

TEST(SampleClass, ZeroTemperatureIsArgmax) {
    std::mt19937_64 rng(3);
    const std::vector<double> logits{1, 3, 2};
    EXPECT_EQ(sample_class(logits, 0.0, rng), 1u);
    const std::vector<double> tie{5, 5, 1};
    EXPECT_EQ(sample_class(tie, 0.0, rng), 0u);
}

TEST(SampleClass, InvalidInputsAreSamplingErrors) {
    std::mt19937_64 rng(4);
    const std::vector<double> bad{0, NAN};
    EXPECT_THROW(sample_class(bad, 1.0, rng), SamplingError);
    const std::vector<double> ok{0, 1};
    EXPECT_THROW(sample_class(ok, -1.0, rng), SamplingError);
    EXPECT_THROW(sample_class({}, 1.0, rng), SamplingError);
}
