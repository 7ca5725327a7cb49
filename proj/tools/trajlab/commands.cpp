#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trajlab/binary_io.hpp"
#include "trajlab/checkpoint.hpp"
#include "trajlab/errors.hpp"
#include "trajlab/multimodal.hpp"
#include "trajlab/synthetic.hpp"
#include "trajlab/window_cache.hpp"

namespace fs = std::filesystem;

namespace trajlab::cli {

namespace {

/// Output files of one command, listed in its manifest.
class Outputs {
   public:
    Outputs(const RunConfig& rc, std::string command) : rc_(rc), command_(std::move(command)), root_(rc.out) {
        fs::create_directories(root_);
    }

    const fs::path& root() const { return root_; }

    void write(const fs::path& path, const std::string& bytes) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + path.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw DataError("failed writing " + path.string());
        record(path);
    }

    void record(const fs::path& path) { files_.push_back(path); }

    void finish() {
        write(root_ / ("config_" + command_ + ".ini"), rc_.to_text());
        nlohmann::ordered_json j;
        j["command"] = command_;
        j["seed"] = rc_.seed;
        j["config_hash"] = binary::hex64(rc_.model.hash());
        auto& list = j["files"] = nlohmann::ordered_json::array();
        for (const auto& p : files_) {
            std::ifstream f(p, std::ios::binary);
            const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
            list.push_back({{"path", fs::relative(p, root_).generic_string()},
                            {"bytes", bytes.size()},
                            {"fnv1a64", binary::hex64(binary::fnv1a64(bytes))}});
        }
        std::ofstream m(root_ / ("manifest_" + command_ + ".json"), std::ios::trunc);
        m << j.dump(2) << '\n';
    }

   private:
    const RunConfig& rc_;
    std::string command_;
    fs::path root_;
    std::vector<fs::path> files_;
};

fs::path cache_path(const RunConfig& rc) {
    return rc.data.cache.empty() ? fs::path(rc.out) / "windows.bin" : fs::path(rc.data.cache);
}

fs::path long_cache_path(const fs::path& cache) {
    return cache.parent_path() / (cache.stem().string() + "_long" + cache.extension().string());
}

WindowCache require_cache(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("window cache " + path.string() + " not found; run `trajlab prepare` first");
    return load_window_cache(path);
}

std::vector<Fold> select_folds(const WindowCache& cache, const std::string& fold) {
    if (cache.scenes.size() < 2) throw DataError("leave-one-out folds need at least two scenes");
    const auto datasets = cache.by_scene();
    std::vector<Fold> folds = loo_splits(datasets);
    if (fold.empty()) return folds;
    for (auto& f : folds)
        if (f.test_name == fold) return {std::move(f)};
    throw ConfigError("fold '" + fold + "' is not a scene of the cache");
}

std::vector<TrackWindow> scene_windows(const WindowCache& cache, const std::string& scene) {
    std::vector<TrackWindow> out;
    for (const auto& w : cache.windows)
        if (w.scene_id == scene) out.push_back(w);
    return out;
}

std::string model_label(const ModelConfig& c) {
    std::string label = to_string(c.architecture) + "/" + to_string(c.head);
    if (c.oracle_endpoint) label += "/oracle";
    return label;
}

/// (fold name, checkpoint path) pairs under a model path: either a checkpoint
/// file or a directory holding `<fold>/model.ckpt`.
std::vector<std::pair<std::string, fs::path>> find_models(const fs::path& path, const std::string& fold) {
    std::vector<std::pair<std::string, fs::path>> out;
    if (fs::is_regular_file(path)) {
        const std::string name = fold.empty() ? path.parent_path().filename().string() : fold;
        out.emplace_back(name, path);
        return out;
    }
    if (!fs::is_directory(path)) throw DataError("model path " + path.string() + " does not exist");
    for (const auto& entry : fs::directory_iterator(path)) {
        const fs::path ckpt = entry.path() / "model.ckpt";
        if (!entry.is_directory() || !fs::exists(ckpt)) continue;
        const std::string name = entry.path().filename().string();
        if (fold.empty() || name == fold) out.emplace_back(name, ckpt);
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw DataError("no checkpoints found under " + path.string() + "; run `trajlab train` first");
    return out;
}

ForecastModel load_model(const fs::path& path) { return restore_model(load_checkpoint(path)); }

void log(const std::string& message) { std::cerr << message << std::endl; }

}  // namespace

RunConfig resolve_config(const std::string& config_path, const Overrides& o) {
    RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (o.out) rc.out = *o.out;
    if (o.seed) rc.seed = *o.seed;
    if (o.fold) rc.fold = *o.fold;
    if (o.arch) rc.model.architecture = parse_architecture(*o.arch);
    if (o.head) rc.model.head = parse_head(*o.head);
    if (o.repr) rc.model.representation = parse_representation(*o.repr);
    if (o.k) rc.model.num_classes = *o.k;
    if (o.n_samples) rc.eval.n_samples = *o.n_samples;
    if (o.horizons) rc.eval.horizons = parse_size_list(*o.horizons);
    if (o.drop_steps) rc.eval.drop_steps = parse_size_list(*o.drop_steps);
    if (o.epochs) rc.train.epochs = *o.epochs;
    if (o.oracle) {
        rc.model.oracle_endpoint = true;
        rc.model.architecture = Architecture::bert_os;
        if (!o.repr) rc.model.representation = Representation::relative_positions;
    }
    rc.resolve();
    return rc;
}

void cmd_synth(const RunConfig& rc, const SynthArgs& args) {
    if (args.scenes == 0 || args.tracks == 0) throw ConfigError("synth needs at least one scene and one track");
    Outputs out(rc, "synth");
    const fs::path dir = rc.data.raw_dir.empty() ? out.root() / "raw" : fs::path(rc.data.raw_dir);
    for (std::size_t s = 0; s < args.scenes; ++s) {
        SyntheticConfig sc;
        sc.tracks = args.tracks;
        sc.length = args.length;
        sc.scene_id = "scene" + std::to_string(s + 1);
        sc.seed = derive_seed(rc.seed, s);
        const auto tracks = generate_tracks(sc);
        const fs::path path = dir / (sc.scene_id + ".txt");
        fs::create_directories(dir);
        write_dataset(path, tracks);
        out.record(path);
    }
    out.finish();
    log("wrote " + std::to_string(args.scenes) + " synthetic scenes to " + dir.string());
}

void cmd_prepare(const RunConfig& rc) {
    if (rc.data.raw_dir.empty()) throw ConfigError("prepare needs data.raw_dir (a directory of scene files)");
    const fs::path raw(rc.data.raw_dir);
    if (!fs::is_directory(raw)) throw DataError("raw data directory " + raw.string() + " not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(raw))
        if (e.is_regular_file() && (e.path().extension() == ".txt" || e.path().extension() == ".csv"))
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .txt scene files in " + raw.string());

    const std::size_t longest =
        std::max(rc.model.pred_len, rc.eval.horizons.empty() ? std::size_t{0}
                                                             : *std::max_element(rc.eval.horizons.begin(), rc.eval.horizons.end()));
    WindowCache standard{rc.model.obs_len, rc.model.pred_len, rc.data.stride, {}, {}};
    WindowCache extended{rc.model.obs_len, longest, rc.data.stride, {}, {}};
    for (const auto& f : files) {
        const auto tracks = parse_dataset(f);
        const std::string scene = f.stem().string();
        standard.scenes.push_back(scene);
        extended.scenes.push_back(scene);
        for (const auto& t : tracks) {
            for (auto& w : extract_windows(t, rc.model.obs_len, rc.model.pred_len, rc.data.stride))
                standard.windows.push_back(std::move(w));
            for (auto& w : extract_windows(t, rc.model.obs_len, longest, rc.data.stride))
                extended.windows.push_back(std::move(w));
        }
    }
    for (std::size_t i = 0; i < standard.windows.size(); ++i) standard.windows[i].window_id = i;
    for (std::size_t i = 0; i < extended.windows.size(); ++i) extended.windows[i].window_id = i;

    Outputs out(rc, "prepare");
    const fs::path cache = cache_path(rc);
    save_window_cache(cache, standard);
    save_window_cache(long_cache_path(cache), extended);
    for (const auto& p : {cache, long_cache_path(cache)}) {
        out.record(p);
        out.record(manifest_path(p));
    }
    out.finish();
    log("prepared " + std::to_string(standard.windows.size()) + " windows (" + std::to_string(extended.windows.size()) +
        " with " + std::to_string(longest) + " future steps) from " + std::to_string(files.size()) + " scenes");
}

void cmd_fit_codebook(const RunConfig& rc) {
    const WindowCache cache = require_cache(cache_path(rc));
    Outputs out(rc, "fit-codebook");
    for (const auto& fold : select_folds(cache, rc.fold)) {
        const CodebookArtifact a =
            fit_codebook_artifact(fold.train, rc.model.representation, rc.model.num_classes, rc.seed,
                                  rc.codebook.augment, rc.train.scale_lo, rc.train.scale_hi, rc.codebook.max_iters);
        const fs::path path = out.root() / fold.test_name / "codebook.json";
        save_codebook_artifact(path, a);
        out.record(path);
        log(fold.test_name + ": K=" + std::to_string(a.codebook.size()) + " inertia " +
            std::to_string(a.codebook.inertia()) + " after " + std::to_string(a.codebook.iterations_run()) +
            " iterations");
    }
    out.finish();
}

void cmd_train(const RunConfig& rc, const std::string& codebook_path) {
    const WindowCache cache = require_cache(cache_path(rc));
    if (cache.obs_len != rc.model.obs_len || cache.pred_len != rc.model.pred_len)
        throw DataError("cache windows are " + std::to_string(cache.obs_len) + "/" + std::to_string(cache.pred_len) +
                        " but the model expects " + std::to_string(rc.model.obs_len) + "/" +
                        std::to_string(rc.model.pred_len));
    Outputs out(rc, "train");
    for (const auto& fold : select_folds(cache, rc.fold)) {
        const fs::path dir = out.root() / fold.test_name;
        std::optional<CodebookArtifact> codebook;
        if (rc.model.head == HeadKind::quantized) {
            const fs::path path = codebook_path.empty() ? dir / "codebook.json" : fs::path(codebook_path);
            if (!fs::exists(path))
                throw ConfigError("the quantized head needs a codebook; run `trajlab fit-codebook` first (missing " +
                                  path.string() + ")");
            codebook = load_codebook_artifact(path);
        }
        TrainOptions opts = rc.train;
        opts.on_epoch = [&](const EpochRecord& r) {
            char line[200];
            std::snprintf(line, sizeof line, "%s epoch %zu loss %.5f val MAD %.4f FAD %.4f lr %.3g (%.1fs)",
                          fold.test_name.c_str(), r.epoch, r.train_loss, r.val_mad, r.val_fad, r.learning_rate,
                          r.seconds);
            log(line);
        };
        const TrainResult result = train(rc.model, fold.train, opts, codebook);
        out.write(dir / "model.ckpt",
                  serialize_checkpoint(make_checkpoint(result.model, result.report.best_epoch, result.report.best_val_mad)));
        out.write(dir / "train_report.jsonl", result.report.to_json_lines());
        log(fold.test_name + ": best epoch " + std::to_string(result.report.best_epoch) + ", val MAD " +
            std::to_string(result.report.best_val_mad) + ", " + std::to_string(result.report.wall_clock_seconds) + "s");
    }
    out.finish();
}

void cmd_eval(const RunConfig& rc, const std::string& model_path, bool best_of_n) {
    const WindowCache cache = require_cache(cache_path(rc));
    const std::string command = best_of_n ? "best-of-n" : "eval";
    Outputs out(rc, command);
    MetricsReport report;
    for (const auto& [fold, path] : find_models(model_path.empty() ? fs::path(rc.out) : fs::path(model_path), rc.fold)) {
        const ForecastModel model = load_model(path);
        const std::vector<TrackWindow> test = scene_windows(cache, fold);
        if (test.empty()) throw DataError("scene '" + fold + "' has no windows in the cache");
        EvalOptions opts;
        opts.decode.mode = best_of_n ? DecodeMode::sampled : rc.eval.mode;
        opts.decode.temperature = rc.eval.temperature;
        opts.decode.seed = rc.seed;
        opts.decode.oracle_endpoint = model.config().oracle_endpoint;
        opts.n_samples = best_of_n ? rc.eval.n_samples : 1;
        opts.selection = rc.eval.selection;
        opts.drop_steps = rc.eval.drop_steps;
        report.rows.push_back(evaluate(model, test, opts, fold, model_label(model.config())));
        const auto& row = report.rows.back();
        log(fold + ": MAD " + std::to_string(row.mad) + " FAD " + std::to_string(row.fad) + " over " +
            std::to_string(row.count) + " windows");
    }
    report.append_average();
    const std::string stem = best_of_n ? "best_of_n" : "metrics";
    out.write(out.root() / (stem + ".json"), report.to_json());
    out.write(out.root() / (stem + ".csv"), report.to_table());
    out.finish();
    std::cout << report.to_table();
}

void cmd_horizon(const RunConfig& rc, const std::string& model_path) {
    const fs::path long_cache = long_cache_path(cache_path(rc));
    const WindowCache cache = require_cache(long_cache);
    Outputs out(rc, "horizon");
    MetricsReport report;
    for (const auto& [fold, path] : find_models(model_path.empty() ? fs::path(rc.out) : fs::path(model_path), rc.fold)) {
        const ForecastModel model = load_model(path);
        EvalOptions opts;
        opts.decode.mode = rc.eval.mode;
        opts.decode.seed = rc.seed;
        opts.decode.temperature = rc.eval.temperature;
        const MetricsReport r =
            horizon_sweep(model, scene_windows(cache, fold), rc.eval.horizons, opts, fold, model_label(model.config()));
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    }
    out.write(out.root() / "horizon.json", report.to_json());
    out.write(out.root() / "horizon.csv", report.to_table());
    out.finish();
    std::cout << report.to_table();
}

void cmd_analyze_multimodal(const RunConfig& rc, const std::string& model_path, std::size_t n_clusters) {
    const WindowCache cache = require_cache(cache_path(rc));
    std::string test_scene = rc.fold;
    if (test_scene.empty()) {
        const bool has_zara2 = std::find(cache.scenes.begin(), cache.scenes.end(), "zara2") != cache.scenes.end();
        test_scene = has_zara2 ? "zara2" : cache.scenes.back();
    }
    std::vector<TrackWindow> train_canon, test_canon;
    for (const auto& w : cache.windows)
        (w.scene_id == test_scene ? test_canon : train_canon).push_back(canonicalize(w).window);
    if (test_canon.empty()) throw DataError("test scene '" + test_scene + "' has no windows");

    Outputs out(rc, "analyze-multimodal");
    const auto clusters = cluster_motion_types(train_canon, n_clusters, rc.seed);
    std::vector<FigurePanel> panels = cluster_panels(train_canon, clusters, kPanelMemberCap, rc.seed);

    std::optional<ForecastModel> model;
    if (!model_path.empty()) model.emplace(load_model(model_path));

    nlohmann::ordered_json summary;
    summary["test_scene"] = test_scene;
    auto& list = summary["clusters"] = nlohmann::ordered_json::array();
    for (const auto& c : clusters) {
        double variance = 0.0;
        for (const auto& f : c.features) variance += f.direction_variance;
        nlohmann::ordered_json entry{{"cluster", c.cluster_id},
                                     {"members", c.member_ids.size()},
                                     {"mean_speed", c.mean_speed},
                                     {"mean_direction_variance", variance / static_cast<double>(c.features.size())},
                                     {"medoid_window", c.medoid_id}};
        const TrackWindow& medoid = train_canon[c.medoid_index];
        const auto ranked = nearest_to_medoid(test_canon, medoid);
        entry["nearest_test_window"] = test_canon[ranked.front().index].window_id;
        entry["nearest_test_distance"] = ranked.front().distance;
        if (model) {
            const TrackWindow& probe = test_canon[ranked.front().index];
            const FigurePanel& members = panels[c.cluster_id - 1];
            std::vector<Vec2> endpoints;
            for (const auto& w : members.windows) endpoints.push_back(w.future.back());
            const auto sweep = endpoint_sweep(*model, probe, endpoints);
            FigurePanel p;
            p.cluster_id = c.cluster_id;
            p.name = "sweep";
            for (const auto& s : sweep) {
                p.windows.push_back(probe);
                p.predictions.push_back(s.forecast.positions);
            }
            panels.push_back(std::move(p));
        }
        list.push_back(std::move(entry));
    }
    for (const auto& path : emit_figure_data(panels, out.root() / "figures")) out.record(path);
    out.write(out.root() / "clusters.json", summary.dump(2) + "\n");
    out.finish();
    log("clustered " + std::to_string(train_canon.size()) + " training windows into " + std::to_string(clusters.size()) +
        " motion types");
}

void cmd_report(const RunConfig& rc, const std::vector<std::string>& runs) {
    if (runs.empty()) throw ConfigError("report needs at least one run directory or metrics file");
    struct Cell {
        double mad = 0.0, fad = 0.0;
    };
    std::map<std::string, std::map<std::string, Cell>> grid;
    std::vector<std::string> heads{"regressive", "gaussian", "quantized"};
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    for (const auto& run : runs) {
        fs::path path(run);
        if (fs::is_directory(path)) path /= "metrics.json";
        std::ifstream f(path);
        if (!f) throw DataError("cannot open metrics file " + path.string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed metrics file " + path.string() + ": " + e.what());
        }
        for (const auto& row : j.at("rows")) {
            if (row.at("dataset") != "Avg") continue;
            const std::string config = row.at("config");
            const auto slash = config.find('/');
            const std::string arch = config.substr(0, slash);
            const std::string head = slash == std::string::npos ? "" : config.substr(slash + 1);
            if (std::find(heads.begin(), heads.end(), head) == heads.end()) heads.push_back(head);
            grid[arch][head] = {row.at("mad").get<double>(), row.at("fad").get<double>()};
            all.push_back({{"architecture", arch},
                           {"head", head},
                           {"mad", row.at("mad").get<double>()},
                           {"fad", row.at("fad").get<double>()},
                           {"source", path.generic_string()}});
        }
    }
    std::ostringstream table;
    table.precision(4);
    table << std::fixed << "model";
    for (const auto& h : heads) table << ',' << h;
    table << '\n';
    for (const auto& [arch, row] : grid) {
        table << arch;
        for (const auto& h : heads) {
            table << ',';
            if (auto it = row.find(h); it != row.end()) table << it->second.mad << '/' << it->second.fad;
        }
        table << '\n';
    }
    Outputs out(rc, "report");
    out.write(out.root() / "report.csv", table.str());
    out.write(out.root() / "report.json", all.dump(2) + "\n");
    out.finish();
    std::cout << table.str();
}

}  // namespace trajlab::cli
