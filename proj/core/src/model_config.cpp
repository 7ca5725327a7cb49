#include "trajlab/model_config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "trajlab/binary_io.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::lstm:
            return "lstm";
        case Architecture::tf:
            return "tf";
        case Architecture::bert_ar:
            return "bert_ar";
        case Architecture::bert_os:
            return "bert_os";
    }
    return "?";
}

std::string to_string(HeadKind h) {
    switch (h) {
        case HeadKind::regressive:
            return "regressive";
        case HeadKind::gaussian:
            return "gaussian";
        case HeadKind::quantized:
            return "quantized";
    }
    return "?";
}

Architecture parse_architecture(std::string_view text) {
    if (text == "lstm") return Architecture::lstm;
    if (text == "tf") return Architecture::tf;
    if (text == "bert_ar" || text == "bert-ar") return Architecture::bert_ar;
    if (text == "bert_os" || text == "bert-os") return Architecture::bert_os;
    throw ConfigError("unknown architecture '" + std::string(text) + "'");
}

HeadKind parse_head(std::string_view text) {
    if (text == "regressive" || text == "regression") return HeadKind::regressive;
    if (text == "gaussian") return HeadKind::gaussian;
    if (text == "quantized") return HeadKind::quantized;
    throw ConfigError("unknown head '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (layers == 0) throw ConfigError("layers must be positive");
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("heads (" + std::to_string(heads) + ") must divide d_model (" + std::to_string(d_model) + ")");
    if (architecture != Architecture::lstm && d_model % 2 != 0)
        throw ConfigError("d_model must be even for sinusoidal time stamps");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (obs_len == 0 || pred_len == 0) throw ConfigError("obs_len and pred_len must be at least 1");
    if (head == HeadKind::quantized && num_classes < 2) throw ConfigError("quantized head needs K >= 2");
    if (representation == Representation::absolute) throw ConfigError("models use speeds or relative_positions");
    if (ff_multiplier == 0) throw ConfigError("ff_multiplier must be positive");
    if (oracle_endpoint &&
        (architecture != Architecture::bert_os || representation != Representation::relative_positions))
        throw ConfigError("oracle_endpoint requires architecture bert_os with relative_positions");
}

std::size_t ModelConfig::head_width() const {
    switch (head) {
        case HeadKind::regressive:
            return 2;
        case HeadKind::gaussian:
            return 5;
        case HeadKind::quantized:
            return num_classes;
    }
    return 0;
}

std::string ModelConfig::canonical_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "architecture=" << to_string(architecture) << '\n'
       << "d_model=" << d_model << '\n'
       << "layers=" << layers << '\n'
       << "heads=" << heads << '\n'
       << "dropout=" << dropout_rate << '\n'
       << "head=" << to_string(head) << '\n'
       << "k=" << num_classes << '\n'
       << "representation=" << to_string(representation) << '\n'
       << "obs_len=" << obs_len << '\n'
       << "pred_len=" << pred_len << '\n'
       << "oracle_endpoint=" << (oracle_endpoint ? "true" : "false") << '\n'
       << "error_feedback=" << (error_feedback ? "true" : "false") << '\n'
       << "ff_multiplier=" << ff_multiplier << '\n'
       << "seed=" << seed << '\n';
    return os.str();
}

std::uint64_t ModelConfig::hash() const { return binary::fnv1a64(canonical_text()); }

namespace {

constexpr std::array<std::string_view, 14> kKeys = {"architecture", "d_model",        "layers",        "heads",
                                                    "dropout",      "head",           "k",             "representation",
                                                    "obs_len",      "pred_len",       "oracle_endpoint", "error_feedback",
                                                    "ff_multiplier", "seed"};

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    const std::string text(v);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty())
        throw ConfigError(std::string(key) + ": expected a number, got '" + text + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

}  // namespace

bool ModelConfig::is_key(std::string_view key) {
    return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

void ModelConfig::set(std::string_view key, std::string_view value) {
    if (key == "architecture")
        architecture = parse_architecture(value);
    else if (key == "d_model")
        d_model = parse_unsigned(key, value);
    else if (key == "layers")
        layers = parse_unsigned(key, value);
    else if (key == "heads")
        heads = parse_unsigned(key, value);
    else if (key == "dropout")
        dropout_rate = parse_double(key, value);
    else if (key == "head")
        head = parse_head(value);
    else if (key == "k")
        num_classes = parse_unsigned(key, value);
    else if (key == "representation")
        representation = parse_representation(value);
    else if (key == "obs_len")
        obs_len = parse_unsigned(key, value);
    else if (key == "pred_len")
        pred_len = parse_unsigned(key, value);
    else if (key == "oracle_endpoint")
        oracle_endpoint = parse_bool(key, value);
    else if (key == "error_feedback")
        error_feedback = parse_bool(key, value);
    else if (key == "ff_multiplier")
        ff_multiplier = parse_unsigned(key, value);
    else if (key == "seed")
        seed = parse_unsigned(key, value);
    else
        throw ConfigError("unknown model key '" + std::string(key) + "'");
}

ModelConfig ModelConfig::from_text(std::string_view text) {
    ModelConfig c;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("malformed config line '" + std::string(line) + "'");
        c.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return c;
}

ModelConfig ModelConfig::desk(Architecture arch, HeadKind head) {
    ModelConfig c;
    c.architecture = arch;
    c.head = head;
    return c;
}

ModelConfig ModelConfig::transformer_full_scale() {
    ModelConfig c;
    c.architecture = Architecture::tf;
    c.d_model = 512;
    c.layers = 6;
    c.heads = 8;
    c.num_classes = 1000;
    return c;
}

ModelConfig ModelConfig::bert_full_scale() {
    ModelConfig c;
    c.architecture = Architecture::bert_os;
    c.d_model = 768;
    c.layers = 12;
    c.heads = 12;
    c.num_classes = 1000;
    c.representation = Representation::relative_positions;
    return c;
}

}  // namespace trajlab
