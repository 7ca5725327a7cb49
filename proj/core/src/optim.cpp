#include "trajlab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "trajlab/errors.hpp"

namespace trajlab {

std::size_t LearningRateSchedule::warmup_steps() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(warmup_epochs * static_cast<double>(steps_per_epoch))));
}

double LearningRateSchedule::rate(std::uint64_t step) const {
    const double s = static_cast<double>(std::max<std::uint64_t>(step, 1));
    const double warm = static_cast<double>(warmup_steps());
    if (s <= warm) return base_rate * s / warm;
    return base_rate * std::sqrt(warm / s);
}

Adam::Adam(ParameterList params, LearningRateSchedule schedule, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    if (!(schedule.base_rate > 0.0)) throw ConfigError("learning rate must be positive");
    state_.schedule = schedule;
    for (const auto& p : params_) {
        if (!p.tensor.requires_grad()) throw ConfigError("parameter " + p.name + " does not require gradients");
        state_.first_moment.emplace_back(p.tensor.size(), 0.0);
        state_.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_)
        for (double g : p.tensor.grad())
            if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter " + p.name);

    const std::uint64_t t = ++state_.step_count;
    const double lr = state_.schedule.rate(t);
    const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto values = params_[i].tensor.mutable_values();
        auto grad = params_[i].tensor.grad();
        auto& m = state_.first_moment[i];
        auto& v = state_.second_moment[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            values[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

double Adam::current_rate() const { return state_.schedule.rate(std::max<std::uint64_t>(state_.step_count, 1)); }

}  // namespace trajlab
