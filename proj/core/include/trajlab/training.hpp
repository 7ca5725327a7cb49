#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajlab/codebook.hpp"
#include "trajlab/data.hpp"
#include "trajlab/model_config.hpp"
#include "trajlab/models.hpp"

namespace trajlab {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mad = 0.0;
    double val_fad = 0.0;
    /// Rate of the last update in the epoch.
    double learning_rate = 0.0;
    double seconds = 0.0;
};

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double base_rate = 1e-4;
    double warmup_epochs = 5.0;
    /// Share of windows held out for model selection. At 0, or when the split
    /// would leave either side empty, validation runs on the training windows.
    double validation_fraction = 0.1;
    /// Cap on validation windows scored per epoch (0 = all).
    std::size_t max_validation_windows = 0;
    /// Epochs without validation improvement before stopping (0 disables).
    std::size_t patience = 10;
    bool augment = true;
    double scale_lo = 0.5;
    double scale_hi = 2.0;
    std::uint64_t seed = 0;
    /// Invoked after every epoch.
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t best_epoch = 0;
    double best_val_mad = 0.0;
    double wall_clock_seconds = 0.0;
    bool early_stopped = false;

    /// One JSON object per epoch. Wall-clock fields are included only on request
    /// so that report files stay reproducible.
    std::string to_json_lines(bool include_timing = false) const;
};

/// Normalisation statistics and the motion codebook fitted on the same
/// (augmented, encoded) training steps.
struct CodebookArtifact {
    NormStats stats;
    MotionCodebook codebook;
};

/// Step values (every step except step 0) of the encoded training windows,
/// after optional scale augmentation.
std::vector<Vec2> training_step_values(std::span<const TrackWindow> windows, Representation representation,
                                       bool augment, double lo, double hi, std::uint64_t seed);

/// Fits NormStats and a K-means codebook on normalised training steps.
CodebookArtifact fit_codebook_artifact(std::span<const TrackWindow> windows, Representation representation,
                                       std::size_t k, std::uint64_t seed, bool augment = true, double lo = 0.5,
                                       double hi = 2.0, std::size_t max_iters = 300);

/// JSON persistence; doubles are written with round-trip precision.
void save_codebook_artifact(const std::filesystem::path& path, const CodebookArtifact& artifact);
CodebookArtifact load_codebook_artifact(const std::filesystem::path& path);

/// Loss of the configured head on the rows produced by `training_outputs`.
Tensor head_loss(HeadKind head, const TrainOutputs& outputs, const PreparedBatch& batch);

/// Rows of `all` selected by `index`, in order.
PreparedBatch select_rows(const PreparedBatch& all, std::span<const std::size_t> index);

struct TrainResult {
    ForecastModel model;
    TrainReport report;
};

/// Trains a model on absolute windows. The best parameters by validation MAD
/// are restored at the end. Throws ConfigError when a quantized head is
/// requested without a codebook and TrainingError on a non-finite loss.
TrainResult train(const ModelConfig& config, std::span<const TrackWindow> windows, const TrainOptions& options,
                  const std::optional<CodebookArtifact>& codebook = std::nullopt);

/// Snapshot of parameter values, in `parameters()` order.
std::vector<std::vector<double>> snapshot_parameters(const ForecastModel& model);
void restore_parameters(const ForecastModel& model, const std::vector<std::vector<double>>& values);

}  // namespace trajlab
