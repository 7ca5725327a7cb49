#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajlab/codebook.hpp"
#include "trajlab/data.hpp"
#include "trajlab/layers.hpp"
#include "trajlab/model_config.hpp"
#include "trajlab/tensor.hpp"

namespace trajlab {

/// Bivariate normal over one step, parameterised by standard deviations and
/// correlation.
struct GaussianParams {
    Vec2 mu;
    Vec2 sigma{1.0, 1.0};
    double rho = 0.0;

    /// Maps raw head outputs (m1, m2, s1, s2, r) to sigma = exp(s), rho = tanh(r).
    static GaussianParams from_raw(std::span<const double> raw);
    /// Row-major 2x2 covariance.
    std::array<double, 4> covariance() const;
    /// mu + L z with L the Cholesky factor of the covariance.
    Vec2 sample(std::mt19937_64& rng) const;
};

/// Model inputs after representation change, normalisation and quantisation.
/// Step data are stored batch-major: element b, step t at index b * len + t.
struct PreparedBatch {
    std::size_t batch = 0;
    std::size_t obs_len = 0;
    std::size_t pred_len = 0;
    std::vector<Vec2> obs_values;
    std::vector<std::size_t> obs_classes;
    std::vector<bool> obs_valid;
    /// Future values and classes; present for training and for oracle endpoints.
    std::vector<Vec2> future_values;
    std::vector<std::size_t> future_classes;

    bool all_valid() const;
};

/// Head outputs for the rows a network predicts during teacher-forced training.
/// Row i of `head_out` predicts future step `target_index[i]` (flat b * pred_len + j).
struct TrainOutputs {
    Tensor head_out;
    std::vector<std::size_t> target_index;
};

/// Value fed back as the next decoder input: normalised step value and, for
/// the quantized head, its class.
struct StepInput {
    Vec2 value;
    std::size_t cls = 0;
};

/// Called once per decoded step with the head rows of every batch element.
/// Must fill `chosen` (one entry per batch element).
using StepChooser = std::function<void(std::size_t step, const Tensor& head_rows, std::vector<StepInput>& chosen)>;

/// Architecture-specific network. Implementations live in models.cpp.
class Network {
   public:
    virtual ~Network() = default;
    virtual TrainOutputs training_outputs(const PreparedBatch& batch, const DropoutContext& dropout,
                                          std::mt19937_64& rng) const = 0;
    /// Produces `pred_len` steps. `oracle` feeds the true final future value
    /// (bert_os only).
    virtual void decode(const PreparedBatch& batch, std::size_t pred_len, bool oracle, const StepChooser& choose) const = 0;
    virtual void collect(ParameterList& out) const = 0;
};

enum class DecodeMode { deterministic, sampled };

struct DecodeOptions {
    DecodeMode mode = DecodeMode::deterministic;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    /// 0 means the configured prediction length.
    std::size_t pred_len = 0;
    bool oracle_endpoint = false;
};

struct ForecastResult {
    HeadKind head = HeadKind::regressive;
    /// Selected per-step values in the model representation (de-normalised).
    std::vector<Vec2> step_values;
    std::vector<GaussianParams> gaussians;          // gaussian head, normalised space
    std::vector<std::vector<double>> class_probs;   // quantized head
    std::vector<std::size_t> classes;               // quantized head
    std::vector<Vec2> positions;                    // absolute, length = prediction length
    std::optional<Vec2> given_endpoint;             // oracle decoding only
    std::string architecture;
    std::string sampling_mode;
    std::uint64_t seed = 0;
};

/// Mixes a base seed with an index; used for per-window and per-sample streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Builds the untrained network for a configuration.
std::unique_ptr<Network> make_network(const ModelConfig& config);
/// Parameter count of `make_network(config)` computed from the layer shapes.
std::size_t count_parameters(const ModelConfig& config);

/// A forecaster: configuration, input statistics, optional codebook and the
/// network. Exposes the same window -> ForecastResult contract for every
/// architecture and head.
class ForecastModel {
   public:
    ForecastModel(ModelConfig config, NormStats stats, std::optional<MotionCodebook> codebook = std::nullopt);

    const ModelConfig& config() const noexcept { return config_; }
    const NormStats& norm_stats() const noexcept { return stats_; }
    const MotionCodebook* codebook() const noexcept { return codebook_ ? &*codebook_ : nullptr; }
    const Network& network() const noexcept { return *net_; }

    /// Named parameter handles (aliasing the model's storage).
    ParameterList parameters() const;

    /// Converts absolute windows into model inputs. With `with_future` the
    /// future steps are encoded too (targets / teacher forcing / oracle).
    PreparedBatch prepare(std::span<const TrackWindow> windows, bool with_future) const;

    TrainOutputs training_outputs(const PreparedBatch& batch, const DropoutContext& dropout, std::mt19937_64& rng) const;

    /// Forecasts every window. `seeds`, when given, provides one sampling seed
    /// per window; otherwise seeds derive from (options.seed, window index).
    std::vector<ForecastResult> forecast(std::span<const TrackWindow> windows, const DecodeOptions& options,
                                         std::span<const std::uint64_t> seeds = {}) const;
    ForecastResult forecast(const TrackWindow& window, const DecodeOptions& options) const;

   private:
    ModelConfig config_;
    NormStats stats_;
    std::optional<MotionCodebook> codebook_;
    std::unique_ptr<Network> net_;
};

}  // namespace trajlab
