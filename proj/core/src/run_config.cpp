#include "trajlab/run_config.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "trajlab/errors.hpp"

namespace trajlab {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t to_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

double to_double(std::string_view key, std::string_view v) {
    const std::string text(v);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (text.empty() || used != text.size())
        throw ConfigError(std::string(key) + ": expected a number, got '" + text + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

[[noreturn]] void unknown(std::string_view section, std::string_view key) {
    throw ConfigError("unknown key '" + std::string(key) + "' in section [" + std::string(section) + "]");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<std::size_t> parse_size_list(std::string_view text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    text = trim(text);
    if (text.empty()) return out;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(to_size("list", trim(text.substr(pos, end - pos))));
        pos = end + 1;
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
    return s;
}

void RunConfig::set(std::string_view section, std::string_view key, std::string_view v) {
    if (section == "run") {
        if (key == "seed")
            seed = to_size(key, v);
        else if (key == "fold")
            fold = std::string(v);
        else if (key == "out")
            out = std::string(v);
        else
            unknown(section, key);
    } else if (section == "model") {
        if (key == "seed") throw ConfigError("seed belongs in section [run]");
        if (!ModelConfig::is_key(key)) unknown(section, key);
        model.set(key, v);
    } else if (section == "data") {
        if (key == "raw_dir")
            data.raw_dir = std::string(v);
        else if (key == "cache")
            data.cache = std::string(v);
        else if (key == "stride")
            data.stride = to_size(key, v);
        else
            unknown(section, key);
    } else if (section == "codebook") {
        if (key == "max_iters")
            codebook.max_iters = to_size(key, v);
        else if (key == "augment")
            codebook.augment = to_bool(key, v);
        else
            unknown(section, key);
    } else if (section == "train") {
        if (key == "epochs")
            train.epochs = to_size(key, v);
        else if (key == "batch_size")
            train.batch_size = to_size(key, v);
        else if (key == "base_rate")
            train.base_rate = to_double(key, v);
        else if (key == "warmup_epochs")
            train.warmup_epochs = to_double(key, v);
        else if (key == "validation_fraction")
            train.validation_fraction = to_double(key, v);
        else if (key == "max_validation_windows")
            train.max_validation_windows = to_size(key, v);
        else if (key == "patience")
            train.patience = to_size(key, v);
        else if (key == "augment")
            train.augment = to_bool(key, v);
        else if (key == "scale_lo")
            train.scale_lo = to_double(key, v);
        else if (key == "scale_hi")
            train.scale_hi = to_double(key, v);
        else
            unknown(section, key);
    } else if (section == "eval") {
        if (key == "n_samples")
            eval.n_samples = to_size(key, v);
        else if (key == "temperature")
            eval.temperature = to_double(key, v);
        else if (key == "selection") {
            if (v == "min_mad")
                eval.selection = BestOfSelection::min_mad;
            else if (v == "per_metric")
                eval.selection = BestOfSelection::per_metric;
            else
                throw ConfigError("selection: expected min_mad or per_metric, got '" + std::string(v) + "'");
        } else if (key == "horizons")
            eval.horizons = parse_size_list(v);
        else if (key == "drop_steps")
            eval.drop_steps = parse_size_list(v);
        else if (key == "mode") {
            if (v == "deterministic")
                eval.mode = DecodeMode::deterministic;
            else if (v == "sampled")
                eval.mode = DecodeMode::sampled;
            else
                throw ConfigError("mode: expected deterministic or sampled, got '" + std::string(v) + "'");
        } else
            unknown(section, key);
    } else {
        throw ConfigError("unknown section [" + std::string(section) + "]");
    }
}

void RunConfig::resolve() {
    model.seed = seed;
    train.seed = seed;
    model.validate();
    if (train.scale_lo <= 0.0 || train.scale_hi < train.scale_lo)
        throw ConfigError("scale range must satisfy 0 < scale_lo <= scale_hi");
    if (train.validation_fraction < 0.0 || train.validation_fraction >= 1.0)
        throw ConfigError("validation_fraction must lie in [0, 1)");
    if (eval.temperature < 0.0) throw ConfigError("temperature must be non-negative");
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "[run]\n"
       << "seed = " << seed << '\n'
       << "fold = " << fold << '\n'
       << "out = " << out << "\n\n[model]\n";
    std::istringstream model_lines(model.canonical_text());
    for (std::string line; std::getline(model_lines, line);) {
        const auto eq = line.find('=');
        if (line.substr(0, eq) == "seed") continue;
        os << line.substr(0, eq) << " = " << line.substr(eq + 1) << '\n';
    }
    os << "\n[data]\n"
       << "raw_dir = " << data.raw_dir << '\n'
       << "cache = " << data.cache << '\n'
       << "stride = " << data.stride << "\n\n[codebook]\n"
       << "max_iters = " << codebook.max_iters << '\n'
       << "augment = " << (codebook.augment ? "true" : "false") << "\n\n[train]\n"
       << "epochs = " << train.epochs << '\n'
       << "batch_size = " << train.batch_size << '\n'
       << "base_rate = " << fmt_double(train.base_rate) << '\n'
       << "warmup_epochs = " << fmt_double(train.warmup_epochs) << '\n'
       << "validation_fraction = " << fmt_double(train.validation_fraction) << '\n'
       << "max_validation_windows = " << train.max_validation_windows << '\n'
       << "patience = " << train.patience << '\n'
       << "augment = " << (train.augment ? "true" : "false") << '\n'
       << "scale_lo = " << fmt_double(train.scale_lo) << '\n'
       << "scale_hi = " << fmt_double(train.scale_hi) << "\n\n[eval]\n"
       << "n_samples = " << eval.n_samples << '\n'
       << "temperature = " << fmt_double(eval.temperature) << '\n'
       << "selection = " << (eval.selection == BestOfSelection::min_mad ? "min_mad" : "per_metric") << '\n'
       << "horizons = " << join_sizes(eval.horizons) << '\n'
       << "drop_steps = " << join_sizes(eval.drop_steps) << '\n'
       << "mode = " << (eval.mode == DecodeMode::deterministic ? "deterministic" : "sampled") << '\n';
    return os.str();
}

RunConfig RunConfig::parse(std::string_view text, const std::string& label) {
    RunConfig cfg;
    std::string section = "run";
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError("unterminated section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ConfigError("expected key = value");
            cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(label + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(text, path.string());
}

}  // namespace trajlab
