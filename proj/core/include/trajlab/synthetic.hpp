#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trajlab/data.hpp"

namespace trajlab {

/// Parameters of a pedestrian-like synthetic motion generator. Distances are
/// metres per 0.4 s step, turn rates radians per step.
struct SyntheticConfig {
    std::size_t tracks = 100;
    std::size_t length = 20;
    double speed_min = 0.3;
    double speed_max = 0.6;
    double turn_rate_max = 0.15;
    /// Fraction of tracks with zero turn rate.
    double line_fraction = 0.5;
    /// Standard deviation of additive position noise.
    double noise_std = 0.0;
    double extent = 20.0;
    std::string scene_id = "synthetic";
    std::uint64_t seed = 0;
};

/// Each track keeps a constant speed and a constant turn rate drawn uniformly
/// from [-turn_rate_max, turn_rate_max]; a `line_fraction` share of tracks
/// go straight.
std::vector<Trajectory> generate_tracks(const SyntheticConfig& config);

/// Windows of every generated track, ids assigned in order.
std::vector<TrackWindow> generate_windows(const SyntheticConfig& config, std::size_t obs_len, std::size_t pred_len);

}  // namespace trajlab
