#include "trajlab/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "trajlab/errors.hpp"

namespace trajlab {

namespace {

double assign(std::span<const Vec2> points, std::span<const Vec2> centroids, std::vector<std::size_t>& assignment,
              bool& changed) {
    changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t c = nearest_centroid(centroids, points[i]);
        if (c != assignment[i]) {
            assignment[i] = c;
            changed = true;
        }
        inertia += (points[i] - centroids[c]).squared_norm();
    }
    return inertia;
}

// Returns false if some cluster ended up empty (and was re-seeded).
bool update(std::span<const Vec2> points, std::vector<Vec2>& centroids, std::vector<std::size_t>& assignment) {
    const std::size_t k = centroids.size();
    std::vector<Vec2> sums(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        sums[assignment[i]] += points[i];
        ++counts[assignment[i]];
    }
    bool all_filled = true;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
            centroids[c] = sums[c] * (1.0 / static_cast<double>(counts[c]));
            continue;
        }
        all_filled = false;
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double d = (points[i] - centroids[assignment[i]]).squared_norm();
            if (d > best) {
                best = d;
                far = i;
            }
        }
        centroids[c] = points[far];
        assignment[far] = c;
    }
    return all_filled;
}

double inertia_of(std::span<const Vec2> points, std::span<const Vec2> centroids) {
    double total = 0.0;
    for (const auto& p : points) total += (p - centroids[nearest_centroid(centroids, p)]).squared_norm();
    return total;
}

}  // namespace

std::size_t nearest_centroid(std::span<const Vec2> centroids, const Vec2& p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = (p - centroids[c]).squared_norm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::size_t count_distinct(std::span<const Vec2> points) {
    std::vector<Vec2> sorted(points.begin(), points.end());
    auto less = [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
    std::sort(sorted.begin(), sorted.end(), less);
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

KMeansResult kmeans(std::span<const Vec2> points, const KMeansOptions& options) {
    if (options.k == 0) throw FitError("k-means needs at least one cluster");
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FitError("k-means input contains non-finite points");
    const std::size_t distinct = count_distinct(points);
    if (distinct < options.k)
        throw FitError("k-means needs at least " + std::to_string(options.k) + " distinct points, got " +
                       std::to_string(distinct));

    std::mt19937_64 rng(options.seed);
    KMeansResult result;
    auto& centroids = result.centroids;
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    centroids.push_back(points[pick(rng)]);
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = (points[i] - centroids[0]).squared_norm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < options.k) {
        double total = 0.0;
        for (double d : d2) total += d;
        const double target = unit(rng) * total;
        double acc = 0.0;
        std::size_t chosen = points.size() - 1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            acc += d2[i];
            if (acc > target && d2[i] > 0.0) {
                chosen = i;
                break;
            }
        }
        // Rounding can leave `chosen` on an already-selected point; fall back to the farthest one.
        if (d2[chosen] == 0.0) chosen = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
        centroids.push_back(points[chosen]);
        for (std::size_t i = 0; i < points.size(); ++i)
            d2[i] = std::min(d2[i], (points[i] - centroids.back()).squared_norm());
    }

    auto& assignment = result.assignment;
    assignment.assign(points.size(), std::numeric_limits<std::size_t>::max());
    bool changed = true;
    assign(points, centroids, assignment, changed);
    while (result.iterations < options.max_iters) {
        update(points, centroids, assignment);
        ++result.iterations;
        result.inertia_history.push_back(assign(points, centroids, assignment, changed));
        if (!changed) break;
    }
    result.inertia = inertia_of(points, centroids);
    return result;
}

double lloyd_iteration_inertia(std::span<const Vec2> points, std::vector<Vec2> centroids) {
    std::vector<std::size_t> assignment(points.size(), std::numeric_limits<std::size_t>::max());
    bool changed = false;
    assign(points, centroids, assignment, changed);
    update(points, centroids, assignment);
    return inertia_of(points, centroids);
}

MotionCodebook::MotionCodebook(std::vector<Vec2> centroids, std::uint64_t seed, std::size_t iterations_run,
                               double inertia)
    : centroids_(std::move(centroids)), seed_(seed), iterations_(iterations_run), inertia_(inertia) {
    if (centroids_.empty()) throw FitError("a codebook needs at least one centroid");
    if (count_distinct(centroids_) != centroids_.size()) throw FitError("codebook centroids must be pairwise distinct");
}

MotionCodebook MotionCodebook::fit(std::span<const Vec2> speeds, std::size_t k, std::uint64_t seed,
                                   std::size_t max_iters) {
    KMeansResult r = kmeans(speeds, {k, seed, max_iters});
    MotionCodebook cb(std::move(r.centroids), seed, r.iterations, r.inertia);
    cb.history_ = std::move(r.inertia_history);
    return cb;
}

std::size_t MotionCodebook::quantize(const Vec2& speed) const {
    if (centroids_.empty()) throw LookupError("quantize on an empty codebook");
    return nearest_centroid(centroids_, speed);
}

const Vec2& MotionCodebook::dequantize(std::size_t index) const {
    if (index >= centroids_.size())
        throw LookupError("codebook index " + std::to_string(index) + " out of range [0, " +
                          std::to_string(centroids_.size()) + ")");
    return centroids_[index];
}

std::size_t sample_class(std::span<const double> logits, double temperature, std::mt19937_64& rng) {
    if (logits.empty()) throw SamplingError("cannot sample from an empty distribution");
    for (double l : logits)
        if (!std::isfinite(l)) throw SamplingError("non-finite logit");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw SamplingError("temperature must be finite and >= 0");
    const auto argmax = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (temperature == 0.0) return argmax;
    const double mx = logits[argmax];
    std::vector<double> weights(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += (weights[i] = std::exp((logits[i] - mx) / temperature));
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return argmax;
}

}  // namespace trajlab
