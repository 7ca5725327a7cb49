#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "trajlab/errors.hpp"

using namespace trajlab;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void add_common(CLI::App* cmd, std::string& config, cli::Overrides& o) {
    cmd->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--fold", o.fold, "test scene of the leave-one-out fold (default: all)");
    cmd->add_option("--arch", o.arch, "lstm | tf | bert_ar | bert_os");
    cmd->add_option("--head", o.head, "regressive | gaussian | quantized");
    cmd->add_option("--repr", o.repr, "speeds | relative_positions");
    cmd->add_option("--k", o.k, "codebook size");
    cmd->add_option("--n-samples", o.n_samples, "samples per prediction for best-of-N");
    cmd->add_option("--horizons", o.horizons, "comma-separated prediction horizons");
    cmd->add_option("--drop", o.drop_steps, "comma-separated observed steps to treat as missing");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_flag("--oracle", o.oracle, "bert_os with the true endpoint as input");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory forecasting with transformers, BERT, LSTM and motion codebooks"};
    app.require_subcommand(1);

    std::string config;
    cli::Overrides o;
    std::string model_path, codebook_path;
    std::size_t clusters = 6;
    cli::SynthArgs synth;
    std::vector<std::string> runs;

    auto* c_synth = app.add_subcommand("synth", "write synthetic scene files");
    c_synth->add_option("--scenes", synth.scenes, "number of scenes");
    c_synth->add_option("--tracks", synth.tracks, "tracks per scene");
    c_synth->add_option("--length", synth.length, "points per track");
    auto* c_prepare = app.add_subcommand("prepare", "cut raw scene files into a window cache");
    auto* c_codebook = app.add_subcommand("fit-codebook", "fit normalisation and the motion codebook per fold");
    auto* c_train = app.add_subcommand("train", "train one model per fold");
    c_train->add_option("--codebook", codebook_path, "codebook file (default: <out>/<fold>/codebook.json)");
    auto* c_eval = app.add_subcommand("eval", "MAD/FAD per fold with an Avg row");
    auto* c_best = app.add_subcommand("best-of-n", "best-of-N sampled evaluation");
    auto* c_horizon = app.add_subcommand("horizon", "errors across prediction horizons");
    auto* c_multi = app.add_subcommand("analyze-multimodal", "motion clusters and endpoint sweeps");
    c_multi->add_option("--clusters", clusters, "number of motion clusters");
    auto* c_report = app.add_subcommand("report", "architecture x head matrix from metrics files");
    c_report->add_option("runs", runs, "run directories or metrics.json files")->required();

    for (auto* cmd : {c_synth, c_prepare, c_codebook, c_train, c_eval, c_best, c_horizon, c_multi, c_report})
        add_common(cmd, config, o);
    for (auto* cmd : {c_eval, c_best, c_horizon, c_multi})
        cmd->add_option("--model", model_path, "checkpoint file or training output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const RunConfig rc = cli::resolve_config(config, o);
        if (c_synth->parsed()) cli::cmd_synth(rc, synth);
        if (c_prepare->parsed()) cli::cmd_prepare(rc);
        if (c_codebook->parsed()) cli::cmd_fit_codebook(rc);
        if (c_train->parsed()) cli::cmd_train(rc, codebook_path);
        if (c_eval->parsed()) cli::cmd_eval(rc, model_path, false);
        if (c_best->parsed()) cli::cmd_eval(rc, model_path, true);
        if (c_horizon->parsed()) cli::cmd_horizon(rc, model_path);
        if (c_multi->parsed()) cli::cmd_analyze_multimodal(rc, model_path, clusters);
        if (c_report->parsed()) cli::cmd_report(rc, runs);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const LookupError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    }
    return kOk;
}
