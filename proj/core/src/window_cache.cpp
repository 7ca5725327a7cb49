#include "trajlab/window_cache.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "trajlab/binary_io.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

namespace binary {
std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
}  // namespace binary

namespace {
constexpr char kMagic[8] = {'T', 'R', 'J', 'W', 'I', 'N', 'D', 'W'};
}

std::vector<NamedDataset> WindowCache::by_scene() const {
    std::vector<NamedDataset> out;
    for (const auto& s : scenes) out.push_back({s, {}});
    for (const auto& w : windows)
        for (auto& d : out)
            if (d.name == w.scene_id) {
                d.windows.push_back(w);
                break;
            }
    return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& cache_path) {
    return std::filesystem::path(cache_path.string() + ".json");
}

void save_window_cache(const std::filesystem::path& path, const WindowCache& cache) {
    std::map<std::string, std::uint32_t> scene_index;
    for (std::size_t i = 0; i < cache.scenes.size(); ++i) scene_index[cache.scenes[i]] = static_cast<std::uint32_t>(i);

    std::ostringstream body(std::ios::binary);
    body.write(kMagic, sizeof kMagic);
    binary::write_le<std::uint32_t>(body, kWindowCacheVersion);
    binary::write_le<std::uint32_t>(body, static_cast<std::uint32_t>(cache.obs_len));
    binary::write_le<std::uint32_t>(body, static_cast<std::uint32_t>(cache.pred_len));
    binary::write_le<std::uint32_t>(body, static_cast<std::uint32_t>(cache.stride));
    binary::write_le<std::uint32_t>(body, static_cast<std::uint32_t>(cache.scenes.size()));
    for (const auto& s : cache.scenes) binary::write_string(body, s);
    binary::write_le<std::uint64_t>(body, cache.windows.size());
    std::map<std::string, std::size_t> counts;
    std::vector<Vec2> speeds;
    for (const auto& w : cache.windows) {
        auto it = scene_index.find(w.scene_id);
        if (it == scene_index.end()) throw DataError("window references unknown scene '" + w.scene_id + "'");
        if (w.obs_len() != cache.obs_len || w.pred_len() != cache.pred_len)
            throw DataError("window length does not match cache configuration");
        ++counts[w.scene_id];
        binary::write_le<std::uint32_t>(body, it->second);
        binary::write_le<std::int64_t>(body, w.pedestrian_id);
        binary::write_le<std::int64_t>(body, w.start_frame);
        binary::write_le<std::uint64_t>(body, w.window_id);
        for (std::size_t t = 0; t < cache.obs_len; ++t)
            binary::write_le<std::uint8_t>(body, t < w.valid_mask.size() && !w.valid_mask[t] ? 0 : 1);
        const auto positions = decode_positions(w);
        for (const auto& p : positions) {
            binary::write_le<double>(body, p.x);
            binary::write_le<double>(body, p.y);
        }
        for (std::size_t t = 1; t < positions.size(); ++t) speeds.push_back(positions[t] - positions[t - 1]);
    }
    const std::string bytes = body.str();
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write window cache " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }

    nlohmann::ordered_json manifest;
    manifest["format"] = "trajlab-window-cache";
    manifest["version"] = kWindowCacheVersion;
    manifest["obs_len"] = cache.obs_len;
    manifest["pred_len"] = cache.pred_len;
    manifest["stride"] = cache.stride;
    manifest["total_windows"] = cache.windows.size();
    auto& scenes = manifest["scenes"] = nlohmann::ordered_json::array();
    for (const auto& s : cache.scenes) scenes.push_back({{"name", s}, {"windows", counts[s]}});
    if (!speeds.empty()) {
        const NormStats st = fit_normalization(speeds);
        manifest["speed_stats"] = {{"mean", {st.mean.x, st.mean.y}}, {"std", {st.std.x, st.std.y}}};
    }
    manifest["content_hash"] = binary::hex64(binary::fnv1a64(bytes));
    std::ofstream mout(manifest_path(path), std::ios::trunc);
    if (!mout) throw DataError("cannot write manifest for " + path.string());
    mout << manifest.dump(2) << '\n';
}

WindowCache load_window_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open window cache " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic))
        throw DataError(path.string() + " is not a trajlab window cache");
    const auto version = binary::read_le<std::uint32_t>(in);
    if (version != kWindowCacheVersion)
        throw DataError("unsupported window cache version " + std::to_string(version));
    WindowCache cache;
    cache.obs_len = binary::read_le<std::uint32_t>(in);
    cache.pred_len = binary::read_le<std::uint32_t>(in);
    cache.stride = binary::read_le<std::uint32_t>(in);
    const auto scene_count = binary::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < scene_count; ++i) cache.scenes.push_back(binary::read_string(in));
    const auto count = binary::read_le<std::uint64_t>(in);
    const std::size_t len = cache.obs_len + cache.pred_len;
    std::vector<Vec2> positions(len);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto scene = binary::read_le<std::uint32_t>(in);
        if (scene >= cache.scenes.size()) throw DataError("corrupt window cache: bad scene index");
        const auto ped = binary::read_le<std::int64_t>(in);
        const auto frame = binary::read_le<std::int64_t>(in);
        const auto id = binary::read_le<std::uint64_t>(in);
        std::vector<bool> valid(cache.obs_len);
        for (std::size_t t = 0; t < cache.obs_len; ++t) valid[t] = binary::read_le<std::uint8_t>(in) != 0;
        for (auto& p : positions) {
            p.x = binary::read_le<double>(in);
            p.y = binary::read_le<double>(in);
        }
        TrackWindow w = to_representation(positions, cache.obs_len, Representation::absolute);
        w.scene_id = cache.scenes[scene];
        w.pedestrian_id = ped;
        w.start_frame = frame;
        w.window_id = id;
        w.valid_mask = std::move(valid);
        cache.windows.push_back(std::move(w));
    }
    return cache;
}

}  // namespace trajlab
