#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "trajlab/errors.hpp"
#include "trajlab/ops.hpp"
#include "trajlab/optim.hpp"

using namespace trajlab;

TEST(Schedule, RampsLinearlyToBaseThenDecays) {
    LearningRateSchedule s{1e-3, 5.0, 10};
    EXPECT_EQ(s.warmup_steps(), 50u);
    EXPECT_NEAR(s.rate(1), 1e-3 / 50.0, 1e-18);
    EXPECT_NEAR(s.rate(25), 0.5e-3, 1e-18);
    EXPECT_DOUBLE_EQ(s.rate(50), 1e-3);  // end of epoch 5
    EXPECT_NEAR(s.rate(200), 1e-3 * std::sqrt(50.0 / 200.0), 1e-18);
    for (std::uint64_t t = 0; t < 100000; t += 37) EXPECT_GT(s.rate(t), 0.0);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
    Tensor w = Tensor::matrix(1, 3, {1.0, -2.0, 0.5}, true);
    Adam adam({{"w", w}}, LearningRateSchedule{0.1, 1.0, 1});
    adam.step();
    EXPECT_EQ(w.values()[0], 1.0);
    EXPECT_EQ(w.values()[1], -2.0);
    EXPECT_EQ(w.values()[2], 0.5);
    EXPECT_EQ(adam.state().step_count, 1u);
}

TEST(Adam, FirstStepMovesByRateTimesSign) {
    Tensor w = Tensor::matrix(1, 2, {0.0, 0.0}, true);
    Adam adam({{"w", w}}, LearningRateSchedule{0.01, 1.0, 1});
    w.mutable_grad()[0] = 3.0;
    w.mutable_grad()[1] = -0.25;
    adam.step();
    // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
    EXPECT_NEAR(w.values()[0], -0.01 * 3.0 / (3.0 + 1e-9), 1e-15);
    EXPECT_NEAR(w.values()[1], 0.01 * 0.25 / (0.25 + 1e-9), 1e-15);
}

TEST(Adam, MomentsTrackParameterShapes) {
    Tensor a = Tensor::zeros({2, 3}, true), b = Tensor::zeros({4}, true);
    Adam adam({{"a", a}, {"b", b}}, LearningRateSchedule{});
    ASSERT_EQ(adam.state().first_moment.size(), 2u);
    EXPECT_EQ(adam.state().first_moment[0].size(), 6u);
    EXPECT_EQ(adam.state().second_moment[1].size(), 4u);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
    Tensor a = Tensor::zeros({2}, true), b = Tensor::zeros({2}, true);
    Adam adam({{"layer.a", a}, {"layer.b", b}}, LearningRateSchedule{});
    b.mutable_grad()[1] = std::numeric_limits<double>::quiet_NaN();
    try {
        adam.step();
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("layer.b"), std::string::npos);
    }
    EXPECT_EQ(a.values()[0], 0.0);
}

TEST(Adam, ConvergesOnQuadratic) {
    Tensor w = Tensor::scalar(0.0, true);
    Adam adam({{"w", w}}, LearningRateSchedule{0.1, 5.0, 1});
    for (int i = 0; i < 200; ++i) {
        adam.zero_grad();
        Tensor d = ops::add(w, Tensor::scalar(-2.0));
        backward(ops::mul(d, d));
        adam.step();
    }
    EXPECT_LT(std::abs(w.item() - 2.0), 0.05);
}
