#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trajlab/layers.hpp"

namespace trajlab {

/// Linear ramp to `base_rate` over `warmup_epochs`, then inverse square root
/// decay in optimizer steps.
struct LearningRateSchedule {
    double base_rate = 1e-4;
    double warmup_epochs = 5.0;
    std::size_t steps_per_epoch = 1;

    std::size_t warmup_steps() const;
    /// Rate used by the `step`-th update (1-based). Strictly positive.
    double rate(std::uint64_t step) const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;
};

struct OptimizerState {
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    LearningRateSchedule schedule;
};

class Adam {
   public:
    Adam(ParameterList params, LearningRateSchedule schedule, AdamConfig config = {});

    /// Applies one update from the gradients currently held by the parameters.
    /// Throws TrainingError naming the first parameter with a non-finite gradient;
    /// parameters are left untouched in that case.
    void step();
    void zero_grad();

    double current_rate() const;
    const OptimizerState& state() const noexcept { return state_; }
    const ParameterList& parameters() const noexcept { return params_; }

   private:
    ParameterList params_;
    AdamConfig config_;
    OptimizerState state_;
};

}  // namespace trajlab
