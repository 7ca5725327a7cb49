#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajlab/geometry.hpp"

namespace trajlab {

/// How the per-step values of a TrackWindow are expressed.
/// `absolute` holds raw world positions and is what window extraction yields.
enum class Representation { absolute, speeds, relative_positions };

std::string to_string(Representation r);
Representation parse_representation(std::string_view text);

struct Trajectory {
    std::string scene_id;
    std::int64_t pedestrian_id = 0;
    std::vector<std::int64_t> frames;
    std::vector<Vec2> positions;
    double frame_period = 0.4;

    std::size_t size() const noexcept { return positions.size(); }
};

struct TrackWindow {
    std::vector<Vec2> observed;
    std::vector<Vec2> future;
    Representation representation = Representation::absolute;
    /// Absolute position of the first observed point.
    Vec2 origin;
    /// Per observed step; false marks a missing observation.
    std::vector<bool> valid_mask;

    std::string scene_id;
    std::int64_t pedestrian_id = 0;
    std::int64_t start_frame = 0;
    std::uint64_t window_id = 0;

    std::size_t obs_len() const noexcept { return observed.size(); }
    std::size_t pred_len() const noexcept { return future.size(); }
    /// Observed then future values, as stored.
    std::vector<Vec2> values() const;
};

/// Reads whitespace-separated `frame pedestrian x y` lines. Lines may be in any
/// order; blank lines and lines starting with '#' are skipped. A pedestrian's
/// samples are split into separate trajectories wherever the frame gap differs
/// from the file's dominant gap.
std::vector<Trajectory> parse_dataset(const std::filesystem::path& path);
std::vector<Trajectory> parse_dataset(std::istream& in, const std::string& file_label, const std::string& scene_id);

/// Writes trajectories in the format `parse_dataset` reads.
void write_dataset(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                   std::int64_t frame_step = 10);

/// Sliding windows of obs_len + pred_len consecutive points, in absolute form.
std::vector<TrackWindow> extract_windows(const Trajectory& traj, std::size_t obs_len, std::size_t pred_len,
                                         std::size_t stride = 1);

/// Encodes raw positions (observed then future). Speeds use s_0 = (0, 0) and
/// s_t = x_t - x_{t-1}; relative positions are x_t - x_0.
TrackWindow to_representation(std::span<const Vec2> positions, std::size_t obs_len, Representation mode);
/// Re-encodes a window, keeping its metadata and validity mask.
TrackWindow to_representation(const TrackWindow& window, Representation mode);

/// Absolute positions of the whole window (observed then future).
std::vector<Vec2> decode_positions(const TrackWindow& window);
/// Absolute position of the last observed step.
Vec2 last_observed_position(const TrackWindow& window);
/// Turns predicted future values in the window's representation into absolute
/// positions: speeds integrate from the last observed position, relative
/// positions are offset by the origin.
std::vector<Vec2> decode_future(const TrackWindow& window, std::span<const Vec2> future_values);

struct NormStats {
    Vec2 mean;
    Vec2 std{1.0, 1.0};

    Vec2 apply(const Vec2& v) const { return {(v.x - mean.x) / std.x, (v.y - mean.y) / std.y}; }
    Vec2 invert(const Vec2& v) const { return {v.x * std.x + mean.x, v.y * std.y + mean.y}; }
};

inline constexpr double kStdFloor = 1e-8;

/// Population mean and standard deviation of every step value except step 0
/// (which is identically zero in both encoded representations). Each std
/// component is floored at `std_floor`.
NormStats fit_normalization(std::span<const TrackWindow> windows, double std_floor = kStdFloor);
NormStats fit_normalization(std::span<const Vec2> values, double std_floor = kStdFloor);
TrackWindow apply_normalization(const TrackWindow& window, const NormStats& stats);
TrackWindow invert_normalization(const TrackWindow& window, const NormStats& stats);

TrackWindow scale_window(const TrackWindow& window, double factor);
/// Originals followed by one copy of each window scaled by s ~ U[lo, hi].
std::vector<TrackWindow> augment_scale(std::span<const TrackWindow> windows, double lo, double hi,
                                       std::uint64_t seed);

struct RigidTransform {
    Vec2 translation;  // added before rotation
    double cos_theta = 1.0;
    double sin_theta = 0.0;
    bool degenerate = false;

    Vec2 apply(const Vec2& p) const;
    Vec2 invert(const Vec2& p) const;
};

struct CanonicalWindow {
    TrackWindow window;  // absolute representation in the canonical frame
    RigidTransform transform;
};

/// Moves the first observed point to the origin and rotates the last observed
/// point onto the positive x-axis. When both points coincide only the
/// translation is applied and the transform is flagged degenerate.
CanonicalWindow canonicalize(const TrackWindow& window);
TrackWindow uncanonicalize(const TrackWindow& canonical, const RigidTransform& transform);

struct NamedDataset {
    std::string name;
    std::vector<TrackWindow> windows;
};

struct Fold {
    std::string test_name;
    std::vector<std::string> train_names;
    std::vector<TrackWindow> train;
    std::vector<TrackWindow> test;
};

/// Leave-one-out: fold i tests on dataset i and trains on all others.
std::vector<Fold> loo_splits(std::span<const NamedDataset> datasets);

}  // namespace trajlab
