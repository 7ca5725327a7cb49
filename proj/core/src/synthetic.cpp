#include "trajlab/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "trajlab/errors.hpp"

namespace trajlab {

std::vector<Trajectory> generate_tracks(const SyntheticConfig& config) {
    if (config.length < 2) throw ConfigError("synthetic tracks need at least two points");
    if (config.speed_min < 0.0 || config.speed_max < config.speed_min) throw ConfigError("invalid synthetic speed range");
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Trajectory> out;
    out.reserve(config.tracks);
    for (std::size_t i = 0; i < config.tracks; ++i) {
        const double speed = config.speed_min + (config.speed_max - config.speed_min) * unit(rng);
        double heading = 2.0 * std::numbers::pi * unit(rng);
        const bool straight = unit(rng) < config.line_fraction;
        const double turn = straight ? 0.0 : config.turn_rate_max * (2.0 * unit(rng) - 1.0);
        Vec2 p{config.extent * (2.0 * unit(rng) - 1.0), config.extent * (2.0 * unit(rng) - 1.0)};
        Trajectory t;
        t.scene_id = config.scene_id;
        t.pedestrian_id = static_cast<std::int64_t>(i + 1);
        for (std::size_t k = 0; k < config.length; ++k) {
            Vec2 observed = p;
            if (config.noise_std > 0.0) observed += Vec2{config.noise_std * noise(rng), config.noise_std * noise(rng)};
            t.frames.push_back(static_cast<std::int64_t>(k) * 10);
            t.positions.push_back(observed);
            heading += turn;
            p += Vec2{speed * std::cos(heading), speed * std::sin(heading)};
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<TrackWindow> generate_windows(const SyntheticConfig& config, std::size_t obs_len, std::size_t pred_len) {
    std::vector<TrackWindow> out;
    for (const auto& t : generate_tracks(config))
        for (auto& w : extract_windows(t, obs_len, pred_len, 1)) {
            w.window_id = out.size();
            out.push_back(std::move(w));
        }
    return out;
}

}  // namespace trajlab
