#include "trajlab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "trajlab/errors.hpp"

namespace trajlab {

std::string to_string(Representation r) {
    switch (r) {
        case Representation::absolute:
            return "absolute";
        case Representation::speeds:
            return "speeds";
        case Representation::relative_positions:
            return "relative_positions";
    }
    return "?";
}

Representation parse_representation(std::string_view text) {
    if (text == "speeds") return Representation::speeds;
    if (text == "relative_positions" || text == "positions") return Representation::relative_positions;
    if (text == "absolute") return Representation::absolute;
    throw ConfigError("unknown representation '" + std::string(text) + "'");
}

std::vector<Vec2> TrackWindow::values() const {
    std::vector<Vec2> all(observed);
    all.insert(all.end(), future.begin(), future.end());
    return all;
}

namespace {

struct Sample {
    std::int64_t frame;
    Vec2 position;
    std::size_t line;
};

bool parse_double(std::string_view token, double& out) {
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::int64_t parse_integral(std::string_view token, const std::string& file, std::size_t line, std::size_t field) {
    double v = 0.0;
    if (!parse_double(token, v)) throw ParseError(file, line, field, "not a number: '" + std::string(token) + "'");
    if (v != std::floor(v)) throw ParseError(file, line, field, "expected an integer, got '" + std::string(token) + "'");
    return static_cast<std::int64_t>(v);
}

}  // namespace

std::vector<Trajectory> parse_dataset(std::istream& in, const std::string& file_label, const std::string& scene_id) {
    std::map<std::int64_t, std::vector<Sample>> by_pedestrian;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        std::vector<std::string_view> fields;
        std::string_view rest(text);
        while (true) {
            const auto start = rest.find_first_not_of(" \t\r\v\f");
            if (start == std::string_view::npos) break;
            rest.remove_prefix(start);
            const auto stop = rest.find_first_of(" \t\r\v\f");
            fields.push_back(rest.substr(0, stop));
            if (stop == std::string_view::npos) break;
            rest.remove_prefix(stop);
        }
        if (fields.empty() || fields.front().front() == '#') continue;
        if (fields.size() != 4)
            throw ParseError(file_label, line_no, std::min<std::size_t>(fields.size() + 1, 5),
                             "expected 4 fields (frame pedestrian x y), found " + std::to_string(fields.size()));
        const auto frame = parse_integral(fields[0], file_label, line_no, 1);
        const auto ped = parse_integral(fields[1], file_label, line_no, 2);
        Vec2 p;
        if (!parse_double(fields[2], p.x))
            throw ParseError(file_label, line_no, 3, "not a number: '" + std::string(fields[2]) + "'");
        if (!parse_double(fields[3], p.y))
            throw ParseError(file_label, line_no, 4, "not a number: '" + std::string(fields[3]) + "'");
        by_pedestrian[ped].push_back({frame, p, line_no});
    }

    // The dominant positive frame gap defines the native sampling step.
    std::map<std::int64_t, std::size_t> gap_counts;
    for (auto& [ped, samples] : by_pedestrian) {
        std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.frame < b.frame; });
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (samples[i].frame == samples[i - 1].frame)
                throw ParseError(file_label, std::max(samples[i].line, samples[i - 1].line), 1,
                                 "duplicate frame " + std::to_string(samples[i].frame) + " for pedestrian " +
                                     std::to_string(ped));
            ++gap_counts[samples[i].frame - samples[i - 1].frame];
        }
    }
    std::int64_t step = 0;
    std::size_t best = 0;
    for (const auto& [gap, count] : gap_counts)
        if (count > best) {
            best = count;
            step = gap;
        }

    std::vector<Trajectory> out;
    for (const auto& [ped, samples] : by_pedestrian) {
        Trajectory current{scene_id, ped, {}, {}, 0.4};
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (i > 0 && samples[i].frame - samples[i - 1].frame != step) {
                out.push_back(std::move(current));
                current = Trajectory{scene_id, ped, {}, {}, 0.4};
            }
            current.frames.push_back(samples[i].frame);
            current.positions.push_back(samples[i].position);
        }
        if (!current.positions.empty()) out.push_back(std::move(current));
    }
    return out;
}

std::vector<Trajectory> parse_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trajectory file " + path.string());
    return parse_dataset(in, path.string(), path.stem().string());
}

void write_dataset(const std::filesystem::path& path, std::span<const Trajectory> trajectories, std::int64_t frame_step) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trajectory file " + path.string());
    out.precision(17);
    for (const auto& t : trajectories)
        for (std::size_t i = 0; i < t.positions.size(); ++i) {
            const auto frame = t.frames.empty() ? static_cast<std::int64_t>(i) * frame_step : t.frames[i];
            out << frame << '\t' << t.pedestrian_id << '\t' << t.positions[i].x << '\t' << t.positions[i].y << '\n';
        }
}

std::vector<TrackWindow> extract_windows(const Trajectory& traj, std::size_t obs_len, std::size_t pred_len,
                                         std::size_t stride) {
    if (stride == 0) throw ConfigError("window stride must be at least 1");
    if (obs_len == 0 || pred_len == 0) throw ConfigError("observation and prediction lengths must be positive");
    const std::size_t span_len = obs_len + pred_len;
    std::vector<TrackWindow> out;
    if (traj.size() < span_len) return out;
    for (std::size_t start = 0; start + span_len <= traj.size(); start += stride) {
        std::span<const Vec2> pts(traj.positions.data() + start, span_len);
        TrackWindow w = to_representation(pts, obs_len, Representation::absolute);
        w.scene_id = traj.scene_id;
        w.pedestrian_id = traj.pedestrian_id;
        w.start_frame = traj.frames.empty() ? static_cast<std::int64_t>(start) : traj.frames[start];
        out.push_back(std::move(w));
    }
    return out;
}

TrackWindow to_representation(std::span<const Vec2> positions, std::size_t obs_len, Representation mode) {
    if (positions.size() < 2 || obs_len == 0 || obs_len >= positions.size())
        throw ShapeError("a window needs at least one observed and one future point");
    std::vector<Vec2> values(positions.size());
    switch (mode) {
        case Representation::absolute:
            values.assign(positions.begin(), positions.end());
            break;
        case Representation::speeds:
            values[0] = {0.0, 0.0};
            for (std::size_t t = 1; t < positions.size(); ++t) values[t] = positions[t] - positions[t - 1];
            break;
        case Representation::relative_positions:
            for (std::size_t t = 0; t < positions.size(); ++t) values[t] = positions[t] - positions[0];
            break;
    }
    TrackWindow w;
    w.observed.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(obs_len));
    w.future.assign(values.begin() + static_cast<std::ptrdiff_t>(obs_len), values.end());
    w.representation = mode;
    w.origin = positions[0];
    w.valid_mask.assign(obs_len, true);
    return w;
}

TrackWindow to_representation(const TrackWindow& window, Representation mode) {
    const auto positions = decode_positions(window);
    TrackWindow w = to_representation(positions, window.obs_len(), mode);
    w.valid_mask = window.valid_mask;
    w.scene_id = window.scene_id;
    w.pedestrian_id = window.pedestrian_id;
    w.start_frame = window.start_frame;
    w.window_id = window.window_id;
    return w;
}

std::vector<Vec2> decode_positions(const TrackWindow& window) {
    const auto values = window.values();
    std::vector<Vec2> out(values.size());
    switch (window.representation) {
        case Representation::absolute:
            return values;
        case Representation::speeds: {
            Vec2 p = window.origin;
            for (std::size_t t = 0; t < values.size(); ++t) {
                if (t > 0) p += values[t];
                out[t] = p;
            }
            return out;
        }
        case Representation::relative_positions:
            for (std::size_t t = 0; t < values.size(); ++t) out[t] = window.origin + values[t];
            return out;
    }
    return out;
}

Vec2 last_observed_position(const TrackWindow& window) {
    switch (window.representation) {
        case Representation::absolute:
            return window.observed.back();
        case Representation::relative_positions:
            return window.origin + window.observed.back();
        case Representation::speeds: {
            Vec2 p = window.origin;
            for (std::size_t t = 1; t < window.observed.size(); ++t) p += window.observed[t];
            return p;
        }
    }
    return window.origin;
}

std::vector<Vec2> decode_future(const TrackWindow& window, std::span<const Vec2> future_values) {
    std::vector<Vec2> out(future_values.size());
    switch (window.representation) {
        case Representation::absolute:
            out.assign(future_values.begin(), future_values.end());
            break;
        case Representation::relative_positions:
            for (std::size_t t = 0; t < out.size(); ++t) out[t] = window.origin + future_values[t];
            break;
        case Representation::speeds: {
            Vec2 p = last_observed_position(window);
            for (std::size_t t = 0; t < out.size(); ++t) out[t] = (p += future_values[t]);
            break;
        }
    }
    return out;
}

NormStats fit_normalization(std::span<const Vec2> values, double std_floor) {
    if (values.empty()) throw DataError("cannot fit normalization statistics on an empty set");
    Vec2 sum;
    for (const auto& v : values) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw DataError("non-finite value in normalization input");
        sum += v;
    }
    const double n = static_cast<double>(values.size());
    NormStats stats;
    stats.mean = sum * (1.0 / n);
    Vec2 sq;
    for (const auto& v : values) {
        const Vec2 d = v - stats.mean;
        sq += Vec2{d.x * d.x, d.y * d.y};
    }
    stats.std = {std::max(std::sqrt(sq.x / n), std_floor), std::max(std::sqrt(sq.y / n), std_floor)};
    return stats;
}

NormStats fit_normalization(std::span<const TrackWindow> windows, double std_floor) {
    std::vector<Vec2> values;
    for (const auto& w : windows) {
        const auto all = w.values();
        values.insert(values.end(), all.begin() + 1, all.end());
    }
    return fit_normalization(values, std_floor);
}

TrackWindow apply_normalization(const TrackWindow& window, const NormStats& stats) {
    TrackWindow w = window;
    for (auto& v : w.observed) v = stats.apply(v);
    for (auto& v : w.future) v = stats.apply(v);
    return w;
}

TrackWindow invert_normalization(const TrackWindow& window, const NormStats& stats) {
    TrackWindow w = window;
    for (auto& v : w.observed) v = stats.invert(v);
    for (auto& v : w.future) v = stats.invert(v);
    return w;
}

TrackWindow scale_window(const TrackWindow& window, double factor) {
    TrackWindow w = window;
    for (auto& v : w.observed) v *= factor;
    for (auto& v : w.future) v *= factor;
    w.origin *= factor;
    return w;
}

std::vector<TrackWindow> augment_scale(std::span<const TrackWindow> windows, double lo, double hi, std::uint64_t seed) {
    if (!(lo > 0.0) || hi < lo) throw ConfigError("scale augmentation range must satisfy 0 < lo <= hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<TrackWindow> out(windows.begin(), windows.end());
    out.reserve(2 * windows.size());
    for (const auto& w : windows) out.push_back(scale_window(w, dist(rng)));
    return out;
}

Vec2 RigidTransform::apply(const Vec2& p) const {
    const Vec2 t = p + translation;
    return {cos_theta * t.x - sin_theta * t.y, sin_theta * t.x + cos_theta * t.y};
}

Vec2 RigidTransform::invert(const Vec2& p) const {
    const Vec2 r{cos_theta * p.x + sin_theta * p.y, -sin_theta * p.x + cos_theta * p.y};
    return r - translation;
}

CanonicalWindow canonicalize(const TrackWindow& window) {
    const auto positions = decode_positions(window);
    const Vec2 first = positions.front();
    const Vec2 last_obs = positions[window.obs_len() - 1];
    RigidTransform tf;
    tf.translation = Vec2{0.0, 0.0} - first;
    const Vec2 d = last_obs - first;
    const double r = d.norm();
    if (r == 0.0) {
        tf.degenerate = true;
    } else {
        // Rotate by -atan2(d.y, d.x).
        tf.cos_theta = d.x / r;
        tf.sin_theta = -d.y / r;
    }
    std::vector<Vec2> moved(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) moved[i] = tf.apply(positions[i]);
    moved[0] = {0.0, 0.0};
    if (!tf.degenerate) moved[window.obs_len() - 1] = {r, 0.0};
    CanonicalWindow out{to_representation(moved, window.obs_len(), Representation::absolute), tf};
    out.window.valid_mask = window.valid_mask;
    out.window.scene_id = window.scene_id;
    out.window.pedestrian_id = window.pedestrian_id;
    out.window.start_frame = window.start_frame;
    out.window.window_id = window.window_id;
    return out;
}

TrackWindow uncanonicalize(const TrackWindow& canonical, const RigidTransform& transform) {
    auto positions = decode_positions(canonical);
    for (auto& p : positions) p = transform.invert(p);
    TrackWindow w = to_representation(positions, canonical.obs_len(), Representation::absolute);
    w.valid_mask = canonical.valid_mask;
    w.scene_id = canonical.scene_id;
    w.pedestrian_id = canonical.pedestrian_id;
    w.start_frame = canonical.start_frame;
    w.window_id = canonical.window_id;
    return w;
}

std::vector<Fold> loo_splits(std::span<const NamedDataset> datasets) {
    std::vector<Fold> folds;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        Fold f;
        f.test_name = datasets[i].name;
        f.test = datasets[i].windows;
        for (std::size_t j = 0; j < datasets.size(); ++j) {
            if (j == i) continue;
            if (datasets[j].name == datasets[i].name) throw ConfigError("duplicate dataset name " + datasets[i].name);
            f.train_names.push_back(datasets[j].name);
            f.train.insert(f.train.end(), datasets[j].windows.begin(), datasets[j].windows.end());
        }
        folds.push_back(std::move(f));
    }
    return folds;
}

}  // namespace trajlab
