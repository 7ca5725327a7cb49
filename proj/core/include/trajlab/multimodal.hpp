#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajlab/data.hpp"
#include "trajlab/models.hpp"

namespace trajlab {

struct MotionFeatures {
    /// x coordinate of the last observed canonical position.
    double average_speed = 0.0;
    /// Circular variance (1 - mean resultant length) of future step headings.
    double direction_variance = 0.0;
};

/// Features of an absolute window; canonicalizes internally.
MotionFeatures motion_features(const TrackWindow& window);
/// Circular variance of the headings of consecutive steps; zero-length steps
/// are skipped and a path without motion has variance 0.
double circular_heading_variance(std::span<const Vec2> path);

struct MotionCluster {
    std::size_t cluster_id = 0;  // 1-based, ascending mean speed
    std::vector<std::uint64_t> member_ids;
    std::vector<std::size_t> member_index;  // positions in the input list
    std::vector<MotionFeatures> features;
    std::size_t medoid_index = 0;  // position in the input list
    std::uint64_t medoid_id = 0;
    double mean_speed = 0.0;
};

/// Sum of Euclidean distances between corresponding observed positions.
double observed_distance(const TrackWindow& a, const TrackWindow& b);

/// K-means on standardized (speed, direction variance) features of canonical
/// windows. Throws DataError when there are fewer windows than clusters.
std::vector<MotionCluster> cluster_motion_types(std::span<const TrackWindow> canonical, std::size_t n_clusters = 6,
                                                std::uint64_t seed = 0);

struct RankedWindow {
    std::size_t index = 0;
    std::uint64_t window_id = 0;
    double distance = 0.0;
};

/// Windows sorted by observed distance to `medoid`, ties broken by window id.
std::vector<RankedWindow> nearest_to_medoid(std::span<const TrackWindow> windows, const TrackWindow& medoid);

struct EndpointForecast {
    Vec2 requested_endpoint;
    Vec2 emitted_endpoint;
    ForecastResult forecast;
};

/// One oracle one-shot imputation per endpoint, on the observed portion of
/// `window`. Endpoints are absolute positions in the window's frame.
std::vector<EndpointForecast> endpoint_sweep(const ForecastModel& model, const TrackWindow& window,
                                             std::span<const Vec2> endpoints);

/// A figure panel: member windows (absolute, typically canonical) with
/// optional predicted futures aligned by index.
struct FigurePanel {
    std::size_t cluster_id = 0;
    std::string name;
    std::vector<TrackWindow> windows;
    std::vector<std::vector<Vec2>> predictions;
};

inline constexpr std::size_t kPanelMemberCap = 200;

/// Every cluster's members (up to `cap`, evenly sampled by seed) as a panel.
std::vector<FigurePanel> cluster_panels(std::span<const TrackWindow> canonical, std::span<const MotionCluster> clusters,
                                        std::size_t cap = kPanelMemberCap, std::uint64_t seed = 0);

/// Delimited table with header `track,step,x,y,role,cluster`; roles are
/// observed, future_true and future_pred.
std::string figure_table(std::span<const FigurePanel> panels, char delimiter = ',');
std::string figure_svg(const FigurePanel& panel);

/// Writes cluster{n}_{panel}.csv and .svg per panel, plus `figure_data.csv`
/// with all panels. Returns the written paths.
std::vector<std::filesystem::path> emit_figure_data(std::span<const FigurePanel> panels,
                                                    const std::filesystem::path& dir);

}  // namespace trajlab
