#include "trajlab/multimodal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "trajlab/codebook.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

double circular_heading_variance(std::span<const Vec2> path) {
    double c = 0.0, s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Vec2 d = path[i] - path[i - 1];
        const double len = d.norm();
        if (len <= 0.0) continue;
        c += d.x / len;
        s += d.y / len;
        ++n;
    }
    if (n == 0) return 0.0;
    const double r = std::hypot(c, s) / static_cast<double>(n);
    return std::max(0.0, 1.0 - r);
}

MotionFeatures motion_features(const TrackWindow& window) {
    const TrackWindow canon = canonicalize(window).window;
    const std::vector<Vec2> pos = decode_positions(canon);
    MotionFeatures f;
    f.average_speed = pos[canon.obs_len() - 1].x;
    // Headings of the future steps, starting from the last observed point.
    std::span<const Vec2> tail(pos.begin() + static_cast<std::ptrdiff_t>(canon.obs_len() - 1), pos.end());
    f.direction_variance = circular_heading_variance(tail);
    return f;
}

double observed_distance(const TrackWindow& a, const TrackWindow& b) {
    if (a.obs_len() != b.obs_len()) throw ShapeError("windows differ in observation length");
    const std::vector<Vec2> pa = decode_positions(a), pb = decode_positions(b);
    double sum = 0.0;
    for (std::size_t t = 0; t < a.obs_len(); ++t) sum += distance(pa[t], pb[t]);
    return sum;
}

std::vector<MotionCluster> cluster_motion_types(std::span<const TrackWindow> canonical, std::size_t n_clusters,
                                                std::uint64_t seed) {
    if (n_clusters == 0) throw ConfigError("need at least one cluster");
    if (canonical.size() < n_clusters)
        throw DataError("cannot form " + std::to_string(n_clusters) + " clusters from " +
                        std::to_string(canonical.size()) + " windows");
    std::vector<MotionFeatures> feats;
    feats.reserve(canonical.size());
    for (const auto& w : canonical) feats.push_back(motion_features(w));

    std::vector<Vec2> points;
    points.reserve(feats.size());
    for (const auto& f : feats) points.push_back({f.average_speed, f.direction_variance});
    const NormStats z = fit_normalization(points, 1e-12);
    for (auto& p : points) p = z.apply(p);

    KMeansOptions opts;
    opts.k = n_clusters;
    opts.seed = seed;
    const KMeansResult km = kmeans(points, opts);

    std::vector<MotionCluster> clusters(n_clusters);
    for (std::size_t i = 0; i < canonical.size(); ++i) {
        auto& c = clusters[km.assignment[i]];
        c.member_index.push_back(i);
        c.member_ids.push_back(canonical[i].window_id);
        c.features.push_back(feats[i]);
        c.mean_speed += feats[i].average_speed;
    }
    for (auto& c : clusters) {
        if (c.member_index.empty()) throw FitError("clustering produced an empty cluster");
        c.mean_speed /= static_cast<double>(c.member_index.size());
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a : c.member_index) {
            double sum = 0.0;
            for (std::size_t b : c.member_index)
                if (a != b) sum += observed_distance(canonical[a], canonical[b]);
            if (sum < best || (sum == best && canonical[a].window_id < canonical[c.medoid_index].window_id)) {
                best = sum;
                c.medoid_index = a;
            }
        }
        c.medoid_id = canonical[c.medoid_index].window_id;
    }
    std::stable_sort(clusters.begin(), clusters.end(),
                     [](const MotionCluster& a, const MotionCluster& b) { return a.mean_speed < b.mean_speed; });
    for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].cluster_id = i + 1;
    return clusters;
}

std::vector<RankedWindow> nearest_to_medoid(std::span<const TrackWindow> windows, const TrackWindow& medoid) {
    std::vector<RankedWindow> out;
    out.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i)
        out.push_back({i, windows[i].window_id, observed_distance(windows[i], medoid)});
    std::sort(out.begin(), out.end(), [](const RankedWindow& a, const RankedWindow& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.window_id != b.window_id) return a.window_id < b.window_id;
        return a.index < b.index;
    });
    return out;
}

std::vector<EndpointForecast> endpoint_sweep(const ForecastModel& model, const TrackWindow& window,
                                             std::span<const Vec2> endpoints) {
    const ModelConfig& cfg = model.config();
    if (cfg.architecture != Architecture::bert_os || !cfg.oracle_endpoint)
        throw ModelError("endpoint sweeps need a bert_os model trained with oracle endpoints");
    if (window.representation != Representation::absolute) throw DataError("endpoint sweep expects an absolute window");
    const std::size_t n = cfg.pred_len;
    const Vec2 last = window.observed.back();
    std::vector<TrackWindow> inputs;
    inputs.reserve(endpoints.size());
    for (const Vec2& e : endpoints) {
        TrackWindow w = window;
        w.future.resize(n);
        for (std::size_t t = 0; t < n; ++t)
            w.future[t] = last + (e - last) * (static_cast<double>(t + 1) / static_cast<double>(n));
        inputs.push_back(std::move(w));
    }
    DecodeOptions opts;
    opts.oracle_endpoint = true;
    opts.pred_len = n;
    std::vector<ForecastResult> results = model.forecast(inputs, opts);
    std::vector<EndpointForecast> out;
    out.reserve(endpoints.size());
    for (std::size_t i = 0; i < endpoints.size(); ++i)
        out.push_back({endpoints[i], results[i].positions.back(), std::move(results[i])});
    return out;
}

std::vector<FigurePanel> cluster_panels(std::span<const TrackWindow> canonical, std::span<const MotionCluster> clusters,
                                        std::size_t cap, std::uint64_t seed) {
    std::vector<FigurePanel> panels;
    for (const auto& c : clusters) {
        std::vector<std::size_t> members = c.member_index;
        if (cap > 0 && members.size() > cap) {
            std::mt19937_64 rng(derive_seed(seed, c.cluster_id));
            std::shuffle(members.begin(), members.end(), rng);
            members.resize(cap);
            std::sort(members.begin(), members.end());
        }
        FigurePanel p;
        p.cluster_id = c.cluster_id;
        p.name = "members";
        for (std::size_t i : members) p.windows.push_back(canonical[i]);
        panels.push_back(std::move(p));
    }
    return panels;
}

std::string figure_table(std::span<const FigurePanel> panels, char d) {
    std::ostringstream out;
    out << "track" << d << "step" << d << "x" << d << "y" << d << "role" << d << "cluster\n";
    out << std::setprecision(10);
    for (const auto& p : panels)
        for (std::size_t i = 0; i < p.windows.size(); ++i) {
            const TrackWindow& w = p.windows[i];
            const std::vector<Vec2> pos = decode_positions(w);
            for (std::size_t t = 0; t < pos.size(); ++t)
                out << w.window_id << d << t << d << pos[t].x << d << pos[t].y << d
                    << (t < w.obs_len() ? "observed" : "future_true") << d << p.cluster_id << '\n';
            if (i < p.predictions.size())
                for (std::size_t t = 0; t < p.predictions[i].size(); ++t)
                    out << w.window_id << d << w.obs_len() + t << d << p.predictions[i][t].x << d
                        << p.predictions[i][t].y << d << "future_pred" << d << p.cluster_id << '\n';
        }
    return out.str();
}

namespace {

void polyline(std::ostringstream& out, std::span<const Vec2> pts, const char* color, double width) {
    if (pts.size() < 2) return;
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << pts[i].x << ',' << -pts[i].y;
    out << "\"/>\n";
}

}  // namespace

std::string figure_svg(const FigurePanel& panel) {
    double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
    std::vector<std::vector<Vec2>> tracks;
    for (const auto& w : panel.windows) tracks.push_back(decode_positions(w));
    auto grow = [&](const Vec2& p) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) return;
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, -p.y);
        ymax = std::max(ymax, -p.y);
    };
    for (const auto& t : tracks)
        for (const auto& p : t) grow(p);
    for (const auto& t : panel.predictions)
        for (const auto& p : t) grow(p);
    const double pad = 0.05 * std::max(xmax - xmin, ymax - ymin);
    const double stroke = 0.004 * std::max(xmax - xmin, ymax - ymin);

    std::ostringstream out;
    out << std::setprecision(6);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"" << xmin - pad << ' '
        << ymin - pad << ' ' << xmax - xmin + 2 * pad << ' ' << ymax - ymin + 2 * pad << "\">\n";
    out << "  <title>cluster " << panel.cluster_id << ' ' << panel.name << "</title>\n";
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& t = tracks[i];
        const std::size_t n_obs = panel.windows[i].obs_len();
        polyline(out, std::span<const Vec2>(t).first(n_obs), "#1f77b4", stroke);
        polyline(out, std::span<const Vec2>(t).subspan(n_obs - 1), "#2ca02c", stroke);
        if (i < panel.predictions.size() && !panel.predictions[i].empty()) {
            std::vector<Vec2> pred{t[n_obs - 1]};
            pred.insert(pred.end(), panel.predictions[i].begin(), panel.predictions[i].end());
            polyline(out, pred, "#d62728", stroke);
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::vector<std::filesystem::path> emit_figure_data(std::span<const FigurePanel> panels,
                                                    const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto write = [&](const std::filesystem::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot write " + path.string());
        f << text;
        written.push_back(path);
    };
    for (const auto& p : panels) {
        const std::string stem = "cluster" + std::to_string(p.cluster_id) + "_" + p.name;
        write(dir / (stem + ".csv"), figure_table(std::span<const FigurePanel>(&p, 1)));
        write(dir / (stem + ".svg"), figure_svg(p));
    }
    write(dir / "figure_data.csv", figure_table(panels));
    return written;
}

}  // namespace trajlab
