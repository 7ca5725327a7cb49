#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "trajlab/eval.hpp"
#include "trajlab/model_config.hpp"
#include "trajlab/training.hpp"

namespace trajlab {

struct DataSettings {
    /// Directory of raw `frame pedestrian x y` files, one scene per file.
    std::string raw_dir;
    /// Prepared window cache.
    std::string cache;
    std::size_t stride = 1;
};

struct CodebookSettings {
    std::size_t max_iters = 300;
    bool augment = true;
};

struct EvalSettings {
    std::size_t n_samples = 20;
    double temperature = 1.0;
    BestOfSelection selection = BestOfSelection::min_mad;
    std::vector<std::size_t> horizons{12, 16, 20, 24, 28, 32};
    std::vector<std::size_t> drop_steps;
    DecodeMode mode = DecodeMode::deterministic;
};

/// Everything a command needs. Files use `key = value` lines grouped under
/// `[run]`, `[model]`, `[data]`, `[codebook]`, `[train]` and `[eval]`; lines
/// before the first section belong to `[run]`. '#' starts a comment.
struct RunConfig {
    std::uint64_t seed = 0;
    /// Test scene of the leave-one-out fold; empty means all folds.
    std::string fold;
    std::string out = "out";
    ModelConfig model;
    DataSettings data;
    CodebookSettings codebook;
    TrainOptions train;
    EvalSettings eval;

    /// Throws ConfigError for unknown sections or keys and bad values.
    void set(std::string_view section, std::string_view key, std::string_view value);
    /// Applies the run seed to the model, training and evaluation.
    void resolve();
    /// Resolved configuration in the file format.
    std::string to_text() const;

    static RunConfig parse(std::string_view text, const std::string& label = "<config>");
    static RunConfig load(const std::filesystem::path& path);
};

std::vector<std::size_t> parse_size_list(std::string_view text);
std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace trajlab
