#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "trajlab/data.hpp"

namespace trajlab {

enum class Architecture { lstm, tf, bert_ar, bert_os };
enum class HeadKind { regressive, gaussian, quantized };

std::string to_string(Architecture a);
std::string to_string(HeadKind h);
Architecture parse_architecture(std::string_view text);
HeadKind parse_head(std::string_view text);

struct ModelConfig {
    Architecture architecture = Architecture::tf;
    std::size_t d_model = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    double dropout_rate = 0.1;
    HeadKind head = HeadKind::regressive;
    /// Codebook size K; only used by the quantized head.
    std::size_t num_classes = 32;
    Representation representation = Representation::speeds;
    std::size_t obs_len = 8;
    std::size_t pred_len = 12;
    bool oracle_endpoint = false;
    /// Quantized speeds only: observed inputs and future targets are quantized
    /// with a carried residual so that the integrated centroid path tracks the
    /// true path.
    bool error_feedback = true;
    std::size_t ff_multiplier = 4;
    std::uint64_t seed = 0;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
    /// Width of the head output per step.
    std::size_t head_width() const;
    /// Stable `key=value` lines; the basis of config hashes.
    std::string canonical_text() const;
    std::uint64_t hash() const;

    /// Sets one field by its canonical key. Throws ConfigError for unknown
    /// keys or unparsable values.
    void set(std::string_view key, std::string_view value);
    static bool is_key(std::string_view key);
    /// Inverse of canonical_text().
    static ModelConfig from_text(std::string_view text);

    /// Desk-scale defaults: d_model 64, 2 layers, 2 heads, K = 32.
    static ModelConfig desk(Architecture arch, HeadKind head);
    /// Original Transformer sizes: d_model 512, 6 encoder + 6 decoder layers, 8 heads, K = 1000.
    static ModelConfig transformer_full_scale();
    /// BERT-base sizes: d_model 768, 12 layers, 12 heads, K = 1000.
    static ModelConfig bert_full_scale();
};

}  // namespace trajlab
