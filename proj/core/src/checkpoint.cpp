#include "trajlab/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "trajlab/binary_io.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'J', 'C', 'K', 'P', 'T', '1'};

}  // namespace

Checkpoint make_checkpoint(const ForecastModel& model, std::uint64_t epoch, double val_mad) {
    Checkpoint c;
    c.config_text = model.config().canonical_text();
    c.config_hash = model.config().hash();
    c.epoch = epoch;
    c.val_mad = val_mad;
    c.stats = model.norm_stats();
    if (model.codebook()) c.codebook = *model.codebook();
    for (const auto& p : model.parameters()) {
        auto v = p.tensor.values();
        c.parameters.push_back({p.name, p.tensor.shape(), std::vector<double>(v.begin(), v.end())});
    }
    return c;
}

std::string serialize_checkpoint(const Checkpoint& c) {
    using namespace binary;
    std::ostringstream out(std::ios::binary);
    out.write(kMagic, sizeof kMagic);
    write_le<std::uint32_t>(out, c.version);
    write_string(out, c.config_text);
    write_le<std::uint64_t>(out, c.config_hash);
    write_le<std::uint64_t>(out, c.epoch);
    write_le<double>(out, c.val_mad);
    write_le<double>(out, c.stats.mean.x);
    write_le<double>(out, c.stats.mean.y);
    write_le<double>(out, c.stats.std.x);
    write_le<double>(out, c.stats.std.y);
    write_le<std::uint32_t>(out, c.codebook ? 1u : 0u);
    if (c.codebook) {
        const auto& cb = *c.codebook;
        write_le<std::uint64_t>(out, cb.size());
        write_le<std::uint64_t>(out, cb.seed());
        write_le<std::uint64_t>(out, cb.iterations_run());
        write_le<double>(out, cb.inertia());
        for (const auto& v : cb.centroids()) {
            write_le<double>(out, v.x);
            write_le<double>(out, v.y);
        }
    }
    write_le<std::uint64_t>(out, c.parameters.size());
    for (const auto& p : c.parameters) {
        write_string(out, p.name);
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
        for (std::size_t d : p.shape) write_le<std::uint64_t>(out, d);
        write_le<std::uint64_t>(out, p.values.size());
        for (double v : p.values) write_le<double>(out, v);
    }
    return out.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    using namespace binary;
    std::istringstream in(bytes, std::ios::binary);
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
        throw DataError("not a checkpoint file");
    Checkpoint c;
    c.version = read_le<std::uint32_t>(in);
    if (c.version != Checkpoint::kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(c.version));
    c.config_text = read_string(in);
    c.config_hash = read_le<std::uint64_t>(in);
    if (fnv1a64(c.config_text) != c.config_hash) throw DataError("checkpoint config hash does not match its config");
    c.epoch = read_le<std::uint64_t>(in);
    c.val_mad = read_le<double>(in);
    c.stats.mean.x = read_le<double>(in);
    c.stats.mean.y = read_le<double>(in);
    c.stats.std.x = read_le<double>(in);
    c.stats.std.y = read_le<double>(in);
    const auto has_codebook = read_le<std::uint32_t>(in);
    if (has_codebook > 1) throw DataError("corrupt checkpoint codebook flag");
    if (has_codebook) {
        const auto k = read_le<std::uint64_t>(in);
        const auto seed = read_le<std::uint64_t>(in);
        const auto iters = read_le<std::uint64_t>(in);
        const double inertia = read_le<double>(in);
        if (k > (1u << 24)) throw DataError("corrupt checkpoint codebook size");
        std::vector<Vec2> centroids(k);
        for (auto& v : centroids) {
            v.x = read_le<double>(in);
            v.y = read_le<double>(in);
        }
        c.codebook = MotionCodebook(std::move(centroids), seed, iters, inertia);
    }
    const auto n_params = read_le<std::uint64_t>(in);
    if (n_params > (1u << 20)) throw DataError("corrupt checkpoint parameter count");
    for (std::uint64_t i = 0; i < n_params; ++i) {
        ParameterBlob p;
        p.name = read_string(in);
        const auto rank = read_le<std::uint32_t>(in);
        if (rank > 8) throw DataError("corrupt rank for parameter '" + p.name + "'");
        for (std::uint32_t r = 0; r < rank; ++r) p.shape.push_back(read_le<std::uint64_t>(in));
        const auto count = read_le<std::uint64_t>(in);
        if (count != shape_size(p.shape)) throw DataError("parameter '" + p.name + "' size does not match its shape");
        if (count > bytes.size() / 8) throw DataError("parameter '" + p.name + "' exceeds the file");
        p.values.resize(count);
        for (auto& v : p.values) v = read_le<double>(in);
        c.parameters.push_back(std::move(p));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after checkpoint");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    const std::string bytes = serialize_checkpoint(checkpoint);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected, bool force) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Checkpoint c = deserialize_checkpoint(bytes);
    if (expected && expected->hash() != c.config_hash && !force)
        throw ConfigError("checkpoint " + path.string() + " was trained with config " + binary::hex64(c.config_hash) +
                          ", expected " + binary::hex64(expected->hash()) + " (use force to load anyway)");
    return c;
}

ForecastModel restore_model(const Checkpoint& checkpoint) {
    ForecastModel model(checkpoint.config(), checkpoint.stats, checkpoint.codebook);
    ParameterList params = model.parameters();
    if (params.size() != checkpoint.parameters.size())
        throw DataError("checkpoint has " + std::to_string(checkpoint.parameters.size()) + " parameters, model has " +
                        std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& blob = checkpoint.parameters[i];
        if (blob.name != params[i].name || blob.shape != params[i].tensor.shape())
            throw DataError("checkpoint parameter '" + blob.name + "' does not match model parameter '" +
                            params[i].name + "' " + shape_string(params[i].tensor.shape()));
        auto dst = params[i].tensor.mutable_values();
        std::copy(blob.values.begin(), blob.values.end(), dst.begin());
    }
    return model;
}

}  // namespace trajlab
