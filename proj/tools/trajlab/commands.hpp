#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajlab/run_config.hpp"

namespace trajlab::cli {

/// Command-line values layered over the config file.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> fold;
    std::optional<std::string> arch;
    std::optional<std::string> head;
    std::optional<std::string> repr;
    std::optional<std::size_t> k;
    std::optional<std::size_t> n_samples;
    std::optional<std::string> horizons;
    std::optional<std::string> drop_steps;
    std::optional<std::size_t> epochs;
    bool oracle = false;
};

RunConfig resolve_config(const std::string& config_path, const Overrides& o);

struct SynthArgs {
    std::size_t scenes = 5;
    std::size_t tracks = 200;
    std::size_t length = 40;
};

void cmd_synth(const RunConfig& rc, const SynthArgs& args);
void cmd_prepare(const RunConfig& rc);
void cmd_fit_codebook(const RunConfig& rc);
void cmd_train(const RunConfig& rc, const std::string& codebook_path);
void cmd_eval(const RunConfig& rc, const std::string& model_path, bool best_of_n);
void cmd_horizon(const RunConfig& rc, const std::string& model_path);
void cmd_analyze_multimodal(const RunConfig& rc, const std::string& model_path, std::size_t clusters);
void cmd_report(const RunConfig& rc, const std::vector<std::string>& runs);

}  // namespace trajlab::cli
