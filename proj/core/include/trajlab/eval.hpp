#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajlab/data.hpp"
#include "trajlab/models.hpp"

namespace trajlab {

struct Displacement {
    double mad = 0.0;  // mean Euclidean error over steps
    double fad = 0.0;  // Euclidean error at the last step
};

/// Throws ShapeError when the sequences differ in length or are empty.
Displacement mad_fad(std::span<const Vec2> predicted, std::span<const Vec2> truth);

/// First `horizon` absolute future positions of a window (all when 0).
std::vector<Vec2> true_future(const TrackWindow& window, std::size_t horizon = 0);
/// Copy of the window keeping only the first `horizon` future steps.
TrackWindow truncate_future(const TrackWindow& window, std::size_t horizon);

/// Extrapolates the last observed displacement.
std::vector<Vec2> constant_velocity_forecast(const TrackWindow& window, std::size_t horizon);

enum class BestOfSelection {
    min_mad,     // one winner (lowest MAD) reports both MAD and FAD
    per_metric,  // MAD and FAD minimised independently
};

struct BestOfNResult {
    Displacement error;
    std::size_t winner_mad = 0;
    std::size_t winner_fad = 0;
    std::vector<Displacement> samples;
};

/// Seed of sample `index` for a window; sample streams are nested, so the
/// first N' samples of a best-of-N run equal a best-of-N' run.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t window_index, std::uint64_t sample_index);

/// Selection over the first `prefix` samples (all when 0).
BestOfNResult select_best(std::span<const Displacement> samples, BestOfSelection selection, std::size_t prefix = 0);

BestOfNResult best_of_n(const ForecastModel& model, const TrackWindow& window, std::size_t n, std::uint64_t seed,
                        BestOfSelection selection = BestOfSelection::min_mad, double temperature = 1.0,
                        std::uint64_t window_index = 0);

struct EvalOptions {
    /// Decoding for single-sample evaluation; `n_samples > 1` switches to
    /// sampled best-of-N with `decode.seed` as the global seed.
    DecodeOptions decode;
    std::size_t n_samples = 1;
    BestOfSelection selection = BestOfSelection::min_mad;
    /// Observed steps hidden from the model.
    std::vector<std::size_t> drop_steps;
    /// Worker threads; 0 reads TRAJLAB_THREADS (default 1).
    std::size_t threads = 0;
    std::size_t chunk = 128;
};

struct MetricsRow {
    std::string dataset;
    std::string config;
    std::size_t horizon = 0;
    std::size_t n_samples = 1;
    std::size_t count = 0;
    double mad = 0.0;
    double fad = 0.0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;

    /// Appends an unweighted mean over the existing rows (the per-fold average).
    void append_average(const std::string& name = "Avg");
    std::string to_json() const;
    std::string to_table(char delimiter = ',') const;
};

std::size_t configured_threads();

/// Per-window errors at the decode prediction length (model default when 0).
std::vector<Displacement> window_errors(const ForecastModel& model, std::span<const TrackWindow> windows,
                                        const EvalOptions& options);

MetricsRow evaluate(const ForecastModel& model, std::span<const TrackWindow> windows, const EvalOptions& options,
                    const std::string& dataset = "", const std::string& config = "");

MetricsRow evaluate_constant_velocity(std::span<const TrackWindow> windows, std::size_t horizon,
                                      const std::string& dataset = "");

/// One row per horizon on the same observed inputs. Windows whose future is
/// shorter than the largest horizon are excluded.
MetricsReport horizon_sweep(const ForecastModel& model, std::span<const TrackWindow> windows,
                            std::span<const std::size_t> horizons, const EvalOptions& options,
                            const std::string& dataset = "", const std::string& config = "");

/// Standard evaluation with the listed observed steps marked missing.
MetricsRow evaluate_with_missing(const ForecastModel& model, std::span<const TrackWindow> windows,
                                 std::span<const std::size_t> drop_steps, const EvalOptions& options,
                                 const std::string& dataset = "", const std::string& config = "");

inline constexpr std::size_t kStandardHorizons[] = {12, 16, 20, 24, 28, 32};

}  // namespace trajlab
