#include "trajlab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trajlab/binary_io.hpp"
#include "trajlab/errors.hpp"
#include "trajlab/eval.hpp"
#include "trajlab/losses.hpp"
#include "trajlab/optim.hpp"

namespace trajlab {

std::string TrainReport::to_json_lines(bool include_timing) const {
    std::ostringstream out;
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["val_mad"] = e.val_mad;
        j["val_fad"] = e.val_fad;
        j["learning_rate"] = e.learning_rate;
        if (include_timing) j["seconds"] = e.seconds;
        j["seed"] = seed;
        j["config_hash"] = config_hash;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<Vec2> training_step_values(std::span<const TrackWindow> windows, Representation representation,
                                       bool augment, double lo, double hi, std::uint64_t seed) {
    std::vector<TrackWindow> source = augment ? augment_scale(windows, lo, hi, seed)
                                              : std::vector<TrackWindow>(windows.begin(), windows.end());
    std::vector<Vec2> values;
    for (const auto& w : source) {
        const std::vector<Vec2> v = to_representation(w, representation).values();
        values.insert(values.end(), v.begin() + 1, v.end());
    }
    return values;
}

CodebookArtifact fit_codebook_artifact(std::span<const TrackWindow> windows, Representation representation,
                                       std::size_t k, std::uint64_t seed, bool augment, double lo, double hi,
                                       std::size_t max_iters) {
    if (windows.empty()) throw DataError("cannot fit a codebook without training windows");
    std::vector<Vec2> values = training_step_values(windows, representation, augment, lo, hi, seed);
    CodebookArtifact out;
    out.stats = fit_normalization(values);
    for (auto& v : values) v = out.stats.apply(v);
    out.codebook = MotionCodebook::fit(values, k, seed, max_iters);
    return out;
}

void save_codebook_artifact(const std::filesystem::path& path, const CodebookArtifact& artifact) {
    nlohmann::ordered_json j;
    j["format"] = "trajlab-codebook";
    j["version"] = 1;
    j["k"] = artifact.codebook.size();
    j["seed"] = artifact.codebook.seed();
    j["iterations"] = artifact.codebook.iterations_run();
    j["inertia"] = artifact.codebook.inertia();
    j["stats"] = {{"mean", {artifact.stats.mean.x, artifact.stats.mean.y}},
                  {"std", {artifact.stats.std.x, artifact.stats.std.y}}};
    auto& c = j["centroids"] = nlohmann::ordered_json::array();
    for (const auto& v : artifact.codebook.centroids()) c.push_back({v.x, v.y});
    j["inertia_history"] = artifact.codebook.inertia_history();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw DataError("cannot write codebook " + path.string());
    f << j.dump(2) << '\n';
}

CodebookArtifact load_codebook_artifact(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open codebook " + path.string());
    try {
        const auto j = nlohmann::json::parse(f);
        if (j.at("format") != "trajlab-codebook" || j.at("version") != 1)
            throw DataError(path.string() + " is not a version 1 codebook file");
        CodebookArtifact a;
        const auto& st = j.at("stats");
        a.stats.mean = {st.at("mean").at(0).get<double>(), st.at("mean").at(1).get<double>()};
        a.stats.std = {st.at("std").at(0).get<double>(), st.at("std").at(1).get<double>()};
        std::vector<Vec2> centroids;
        for (const auto& c : j.at("centroids")) centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
        if (centroids.size() != j.at("k").get<std::size_t>()) throw DataError("codebook size does not match k");
        a.codebook = MotionCodebook(std::move(centroids), j.at("seed").get<std::uint64_t>(),
                                    j.at("iterations").get<std::size_t>(), j.at("inertia").get<double>());
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed codebook " + path.string() + ": " + e.what());
    }
}

Tensor head_loss(HeadKind head, const TrainOutputs& outputs, const PreparedBatch& batch) {
    const std::size_t n = outputs.target_index.size();
    switch (head) {
        case HeadKind::regressive:
        case HeadKind::gaussian: {
            std::vector<Vec2> target(n);
            for (std::size_t i = 0; i < n; ++i) target[i] = batch.future_values.at(outputs.target_index[i]);
            return head == HeadKind::regressive ? l2_loss(outputs.head_out, target)
                                                : gaussian_nll_loss(outputs.head_out, target);
        }
        case HeadKind::quantized: {
            std::vector<std::size_t> target(n);
            for (std::size_t i = 0; i < n; ++i) target[i] = batch.future_classes.at(outputs.target_index[i]);
            return cross_entropy_loss(outputs.head_out, target);
        }
    }
    throw ConfigError("unknown head");
}

PreparedBatch select_rows(const PreparedBatch& all, std::span<const std::size_t> index) {
    PreparedBatch b;
    b.batch = index.size();
    b.obs_len = all.obs_len;
    b.pred_len = all.pred_len;
    const bool classes = !all.obs_classes.empty();
    const bool future = !all.future_values.empty();
    const bool future_classes = !all.future_classes.empty();
    for (std::size_t i : index) {
        if (i >= all.batch) throw ShapeError("row index out of range");
        for (std::size_t t = 0; t < all.obs_len; ++t) {
            const std::size_t s = i * all.obs_len + t;
            b.obs_values.push_back(all.obs_values[s]);
            b.obs_valid.push_back(all.obs_valid[s]);
            if (classes) b.obs_classes.push_back(all.obs_classes[s]);
        }
        for (std::size_t t = 0; t < all.pred_len; ++t) {
            const std::size_t s = i * all.pred_len + t;
            if (future) b.future_values.push_back(all.future_values[s]);
            if (future_classes) b.future_classes.push_back(all.future_classes[s]);
        }
    }
    return b;
}

std::vector<std::vector<double>> snapshot_parameters(const ForecastModel& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) {
        auto v = p.tensor.values();
        out.emplace_back(v.begin(), v.end());
    }
    return out;
}

void restore_parameters(const ForecastModel& model, const std::vector<std::vector<double>>& values) {
    ParameterList params = model.parameters();
    if (params.size() != values.size()) throw ShapeError("parameter snapshot does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_values();
        if (dst.size() != values[i].size()) throw ShapeError("parameter '" + params[i].name + "' changed size");
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

namespace {

struct Split {
    std::vector<TrackWindow> train;
    std::vector<TrackWindow> validation;
};

Split split_windows(std::span<const TrackWindow> windows, const TrainOptions& options) {
    Split s;
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(options.seed, 1));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::round(options.validation_fraction * static_cast<double>(windows.size())));
    if (options.validation_fraction <= 0.0 || n_val == 0 || n_val >= windows.size()) {
        s.train.assign(windows.begin(), windows.end());
        s.validation = s.train;
    } else {
        std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
        std::sort(val_idx.begin(), val_idx.end());
        std::sort(train_idx.begin(), train_idx.end());
        for (std::size_t i : train_idx) s.train.push_back(windows[i]);
        for (std::size_t i : val_idx) s.validation.push_back(windows[i]);
    }
    if (options.max_validation_windows > 0 && s.validation.size() > options.max_validation_windows)
        s.validation.resize(options.max_validation_windows);
    return s;
}

}  // namespace

TrainResult train(const ModelConfig& config, std::span<const TrackWindow> windows, const TrainOptions& options,
                  const std::optional<CodebookArtifact>& codebook) {
    config.validate();
    if (config.head == HeadKind::quantized && !codebook)
        throw ConfigError("the quantized head needs a codebook fitted before training");
    if (windows.empty()) throw DataError("no training windows");
    if (options.batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (options.epochs == 0) throw ConfigError("epochs must be at least 1");
    for (const auto& w : windows)
        if (w.obs_len() != config.obs_len || w.pred_len() != config.pred_len)
            throw DataError("window lengths " + std::to_string(w.obs_len()) + "/" + std::to_string(w.pred_len()) +
                            " do not match the configured " + std::to_string(config.obs_len) + "/" +
                            std::to_string(config.pred_len));

    const auto started = std::chrono::steady_clock::now();
    Split split = split_windows(windows, options);
    std::vector<TrackWindow> train_set =
        options.augment ? augment_scale(split.train, options.scale_lo, options.scale_hi, derive_seed(options.seed, 2))
                        : split.train;

    NormStats stats;
    std::optional<MotionCodebook> book;
    if (codebook) {
        stats = codebook->stats;
        if (config.head == HeadKind::quantized) book = codebook->codebook;
    } else {
        std::vector<Vec2> values;
        for (const auto& w : train_set) {
            const std::vector<Vec2> v = to_representation(w, config.representation).values();
            values.insert(values.end(), v.begin() + 1, v.end());
        }
        stats = fit_normalization(values);
    }

    TrainResult result{ForecastModel(config, stats, book), TrainReport{}};
    ForecastModel& model = result.model;
    TrainReport& report = result.report;
    report.seed = options.seed;
    report.config_hash = binary::hex64(config.hash());

    const PreparedBatch all = model.prepare(train_set, true);
    const std::size_t n = all.batch;
    const std::size_t steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;

    LearningRateSchedule schedule;
    schedule.base_rate = options.base_rate;
    schedule.warmup_epochs = options.warmup_epochs;
    schedule.steps_per_epoch = steps_per_epoch;
    Adam adam(model.parameters(), schedule);

    std::mt19937_64 rng(derive_seed(options.seed, 3));
    DropoutContext dropout{config.dropout_rate, &rng, true};

    EvalOptions eval;
    eval.decode.mode = DecodeMode::deterministic;
    eval.decode.oracle_endpoint = config.oracle_endpoint;
    eval.threads = 1;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::vector<double>> best = snapshot_parameters(model);
    double best_mad = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const std::size_t lo = step * options.batch_size;
            const std::size_t hi = std::min(n, lo + options.batch_size);
            const PreparedBatch batch = select_rows(all, std::span<const std::size_t>(order).subspan(lo, hi - lo));
            adam.zero_grad();
            const TrainOutputs outputs = model.training_outputs(batch, dropout, rng);
            const Tensor loss = head_loss(config.head, outputs, batch);
            const double value = loss.item();
            if (!std::isfinite(value))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step));
            backward(loss);
            try {
                adam.step();
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step));
            }
            loss_sum += value;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
        rec.learning_rate = schedule.rate(adam.state().step_count);
        const MetricsRow val = evaluate(model, split.validation, eval);
        rec.val_mad = val.mad;
        rec.val_fad = val.fad;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        report.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);

        if (val.mad < best_mad) {
            best_mad = val.mad;
            report.best_epoch = epoch;
            best = snapshot_parameters(model);
            since_best = 0;
        } else if (options.patience > 0 && ++since_best >= options.patience) {
            report.early_stopped = true;
            break;
        }
    }
    restore_parameters(model, best);
    report.best_val_mad = best_mad;
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace trajlab
