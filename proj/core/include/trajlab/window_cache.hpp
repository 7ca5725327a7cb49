#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "trajlab/data.hpp"

namespace trajlab {

/// Windowed corpus as written by `trajlab prepare`: absolute windows tagged by
/// scene. Stored as a little-endian binary file plus a JSON manifest at
/// `<path>.json`.
struct WindowCache {
    std::size_t obs_len = 8;
    std::size_t pred_len = 12;
    std::size_t stride = 1;
    std::vector<std::string> scenes;
    std::vector<TrackWindow> windows;

    std::vector<NamedDataset> by_scene() const;
};

inline constexpr std::uint32_t kWindowCacheVersion = 1;

void save_window_cache(const std::filesystem::path& path, const WindowCache& cache);
WindowCache load_window_cache(const std::filesystem::path& path);
std::filesystem::path manifest_path(const std::filesystem::path& cache_path);

}  // namespace trajlab
