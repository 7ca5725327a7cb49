#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajlab/codebook.hpp"
#include "trajlab/data.hpp"
#include "trajlab/model_config.hpp"
#include "trajlab/models.hpp"
#include "trajlab/tensor.hpp"

namespace trajlab {

struct ParameterBlob {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Serialized model: little-endian binary with the configuration text and
/// hash, training provenance, input statistics, codebook and parameters.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::string config_text;
    std::uint64_t config_hash = 0;
    std::uint64_t epoch = 0;
    double val_mad = 0.0;
    NormStats stats;
    std::optional<MotionCodebook> codebook;
    std::vector<ParameterBlob> parameters;

    ModelConfig config() const { return ModelConfig::from_text(config_text); }
};

Checkpoint make_checkpoint(const ForecastModel& model, std::uint64_t epoch = 0, double val_mad = 0.0);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// With `expected`, a config-hash mismatch throws ConfigError unless `force`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr,
                           bool force = false);

/// Rebuilds the model and copies the stored parameters into it.
ForecastModel restore_model(const Checkpoint& checkpoint);

}  // namespace trajlab
