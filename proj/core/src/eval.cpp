#include "trajlab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "trajlab/errors.hpp"

namespace trajlab {

Displacement mad_fad(std::span<const Vec2> predicted, std::span<const Vec2> truth) {
    if (predicted.size() != truth.size())
        throw ShapeError("predicted and true trajectories differ in length (" + std::to_string(predicted.size()) +
                         " vs " + std::to_string(truth.size()) + ")");
    if (predicted.empty()) throw ShapeError("cannot score an empty trajectory");
    double sum = 0.0;
    for (std::size_t t = 0; t < predicted.size(); ++t) sum += distance(predicted[t], truth[t]);
    return {sum / static_cast<double>(predicted.size()), distance(predicted.back(), truth.back())};
}

std::vector<Vec2> true_future(const TrackWindow& window, std::size_t horizon) {
    const std::vector<Vec2> all = decode_positions(window);
    const std::size_t n = horizon == 0 ? window.pred_len() : horizon;
    if (n > window.pred_len()) throw ShapeError("window has fewer future steps than the requested horizon");
    return {all.begin() + static_cast<std::ptrdiff_t>(window.obs_len()),
            all.begin() + static_cast<std::ptrdiff_t>(window.obs_len() + n)};
}

TrackWindow truncate_future(const TrackWindow& window, std::size_t horizon) {
    if (horizon > window.pred_len()) throw ShapeError("window has fewer future steps than the requested horizon");
    TrackWindow out = window;
    out.future.resize(horizon);
    return out;
}

std::vector<Vec2> constant_velocity_forecast(const TrackWindow& window, std::size_t horizon) {
    const std::vector<Vec2> all = decode_positions(window);
    const std::size_t n_obs = window.obs_len();
    if (n_obs == 0) throw ShapeError("window has no observed steps");
    const Vec2 last = all[n_obs - 1];
    const Vec2 velocity = n_obs >= 2 ? last - all[n_obs - 2] : Vec2{};
    std::vector<Vec2> out;
    out.reserve(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) out.push_back(last + velocity * static_cast<double>(t));
    return out;
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t window_index, std::uint64_t sample_index) {
    return derive_seed(derive_seed(seed, window_index), sample_index);
}

BestOfNResult select_best(std::span<const Displacement> samples, BestOfSelection selection, std::size_t prefix) {
    const std::size_t n = prefix == 0 ? samples.size() : std::min(prefix, samples.size());
    if (n == 0) throw ConfigError("best-of-N needs at least one sample");
    BestOfNResult r;
    r.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t i = 1; i < n; ++i) {
        if (samples[i].mad < samples[r.winner_mad].mad) r.winner_mad = i;
        if (samples[i].fad < samples[r.winner_fad].fad) r.winner_fad = i;
    }
    if (selection == BestOfSelection::min_mad) {
        r.winner_fad = r.winner_mad;
        r.error = samples[r.winner_mad];
    } else {
        r.error = {samples[r.winner_mad].mad, samples[r.winner_fad].fad};
    }
    return r;
}

BestOfNResult best_of_n(const ForecastModel& model, const TrackWindow& window, std::size_t n, std::uint64_t seed,
                        BestOfSelection selection, double temperature, std::uint64_t window_index) {
    if (n == 0) throw ConfigError("best-of-N needs N >= 1");
    const std::vector<TrackWindow> copies(n, window);
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t s = 0; s < n; ++s) seeds[s] = sample_seed(seed, window_index, s);
    DecodeOptions opts;
    opts.mode = DecodeMode::sampled;
    opts.temperature = temperature;
    opts.pred_len = window.pred_len();
    const auto results = model.forecast(copies, opts, seeds);
    const std::vector<Vec2> truth = true_future(window);
    std::vector<Displacement> errors;
    errors.reserve(n);
    for (const auto& r : results) errors.push_back(mad_fad(r.positions, truth));
    return select_best(errors, selection);
}

std::size_t configured_threads() {
    if (const char* env = std::getenv("TRAJLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

namespace {

template <typename Fn>
void parallel_chunks(std::size_t total, std::size_t chunk, std::size_t threads, Fn&& fn) {
    const std::size_t n_chunks = (total + chunk - 1) / chunk;
    threads = std::max<std::size_t>(1, std::min(threads, n_chunks));
    if (threads == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c * chunk, std::min(total, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= n_chunks || failed.load()) return;
                try {
                    fn(c * chunk, std::min(total, (c + 1) * chunk));
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<TrackWindow> with_drops(std::span<const TrackWindow> windows, std::span<const std::size_t> drops) {
    std::vector<TrackWindow> out(windows.begin(), windows.end());
    for (auto& w : out)
        for (std::size_t s : drops) {
            if (s >= w.obs_len())
                throw ConfigError("drop step " + std::to_string(s) + " outside the " + std::to_string(w.obs_len()) +
                                  " observed steps");
            w.valid_mask[s] = false;
        }
    return out;
}

MetricsRow aggregate(std::span<const Displacement> errors, std::size_t horizon, std::size_t n_samples,
                     const std::string& dataset, const std::string& config) {
    MetricsRow row;
    row.dataset = dataset;
    row.config = config;
    row.horizon = horizon;
    row.n_samples = n_samples;
    row.count = errors.size();
    for (const auto& e : errors) {
        row.mad += e.mad;
        row.fad += e.fad;
    }
    if (!errors.empty()) {
        row.mad /= static_cast<double>(errors.size());
        row.fad /= static_cast<double>(errors.size());
    }
    return row;
}

}  // namespace

std::vector<Displacement> window_errors(const ForecastModel& model, std::span<const TrackWindow> input,
                                        const EvalOptions& options) {
    const std::vector<TrackWindow> dropped = with_drops(input, options.drop_steps);
    const std::span<const TrackWindow> windows(dropped);
    const std::size_t horizon = options.decode.pred_len == 0 ? model.config().pred_len : options.decode.pred_len;
    std::vector<Displacement> errors(windows.size());
    const std::size_t threads = options.threads == 0 ? configured_threads() : options.threads;
    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);

    if (options.n_samples <= 1) {
        parallel_chunks(windows.size(), chunk, threads, [&](std::size_t lo, std::size_t hi) {
            std::vector<std::uint64_t> seeds(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) seeds[i - lo] = derive_seed(options.decode.seed, i);
            DecodeOptions opts = options.decode;
            opts.pred_len = horizon;
            const auto results = model.forecast(windows.subspan(lo, hi - lo), opts, seeds);
            for (std::size_t i = lo; i < hi; ++i) errors[i] = mad_fad(results[i - lo].positions, true_future(windows[i], horizon));
        });
    } else {
        parallel_chunks(windows.size(), 1, threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                errors[i] = best_of_n(model, truncate_future(windows[i], horizon), options.n_samples,
                                      options.decode.seed, options.selection, options.decode.temperature, i)
                                .error;
        });
    }
    return errors;
}

MetricsRow evaluate(const ForecastModel& model, std::span<const TrackWindow> windows, const EvalOptions& options,
                    const std::string& dataset, const std::string& config) {
    const auto errors = window_errors(model, windows, options);
    const std::size_t horizon = options.decode.pred_len == 0 ? model.config().pred_len : options.decode.pred_len;
    return aggregate(errors, horizon, std::max<std::size_t>(1, options.n_samples), dataset, config);
}

MetricsRow evaluate_constant_velocity(std::span<const TrackWindow> windows, std::size_t horizon,
                                      const std::string& dataset) {
    std::vector<Displacement> errors;
    errors.reserve(windows.size());
    for (const auto& w : windows) {
        const std::size_t h = horizon == 0 ? w.pred_len() : horizon;
        errors.push_back(mad_fad(constant_velocity_forecast(w, h), true_future(w, h)));
    }
    return aggregate(errors, horizon, 1, dataset, "constant_velocity");
}

MetricsReport horizon_sweep(const ForecastModel& model, std::span<const TrackWindow> windows,
                            std::span<const std::size_t> horizons, const EvalOptions& options,
                            const std::string& dataset, const std::string& config) {
    if (horizons.empty()) throw ConfigError("horizon sweep needs at least one horizon");
    const std::size_t longest = *std::max_element(horizons.begin(), horizons.end());
    std::vector<TrackWindow> eligible;
    for (const auto& w : windows)
        if (w.pred_len() >= longest) eligible.push_back(truncate_future(w, longest));
    MetricsReport report;
    for (std::size_t h : horizons) {
        if (h == 0) throw ConfigError("horizon must be at least 1");
        EvalOptions opts = options;
        opts.decode.pred_len = h;
        std::vector<TrackWindow> cut;
        cut.reserve(eligible.size());
        for (const auto& w : eligible) cut.push_back(truncate_future(w, h));
        report.rows.push_back(evaluate(model, cut, opts, dataset, config));
    }
    return report;
}

MetricsRow evaluate_with_missing(const ForecastModel& model, std::span<const TrackWindow> windows,
                                 std::span<const std::size_t> drop_steps, const EvalOptions& options,
                                 const std::string& dataset, const std::string& config) {
    EvalOptions opts = options;
    opts.drop_steps.assign(drop_steps.begin(), drop_steps.end());
    return evaluate(model, windows, opts, dataset, config);
}

void MetricsReport::append_average(const std::string& name) {
    if (rows.empty()) return;
    MetricsRow avg;
    avg.dataset = name;
    avg.config = rows.front().config;
    avg.horizon = rows.front().horizon;
    avg.n_samples = rows.front().n_samples;
    for (const auto& r : rows) {
        avg.mad += r.mad;
        avg.fad += r.fad;
        avg.count += r.count;
    }
    avg.mad /= static_cast<double>(rows.size());
    avg.fad /= static_cast<double>(rows.size());
    rows.push_back(avg);
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"dataset", r.dataset},
                             {"config", r.config},
                             {"horizon", r.horizon},
                             {"n_samples", r.n_samples},
                             {"count", r.count},
                             {"mad", r.mad},
                             {"fad", r.fad}});
    return j.dump(2) + "\n";
}

std::string MetricsReport::to_table(char d) const {
    std::ostringstream out;
    out << "dataset" << d << "config" << d << "horizon" << d << "n_samples" << d << "count" << d << "mad" << d
        << "fad\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : rows)
        out << r.dataset << d << r.config << d << r.horizon << d << r.n_samples << d << r.count << d << r.mad << d
            << r.fad << '\n';
    return out.str();
}

}  // namespace trajlab
