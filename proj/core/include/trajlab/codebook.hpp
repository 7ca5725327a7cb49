#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "trajlab/geometry.hpp"

namespace trajlab {

struct KMeansOptions {
    std::size_t k = 32;
    std::uint64_t seed = 0;
    std::size_t max_iters = 300;
};

struct KMeansResult {
    std::vector<Vec2> centroids;
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
    std::size_t iterations = 0;
    /// Inertia after each Lloyd iteration; non-increasing.
    std::vector<double> inertia_history;
};

/// Index of the nearest centroid; ties go to the lowest index.
std::size_t nearest_centroid(std::span<const Vec2> centroids, const Vec2& p);

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` is reached. An emptied cluster is re-seeded at the
/// point farthest from its current centroid. Throws FitError when there are
/// fewer distinct points than clusters.
KMeansResult kmeans(std::span<const Vec2> points, const KMeansOptions& options);

/// Runs a single assignment + update pass from the given centroids and
/// returns the resulting inertia.
double lloyd_iteration_inertia(std::span<const Vec2> points, std::vector<Vec2> centroids);

std::size_t count_distinct(std::span<const Vec2> points);

/// K-way vocabulary of 2-D motion steps.
class MotionCodebook {
   public:
    MotionCodebook() = default;
    explicit MotionCodebook(std::vector<Vec2> centroids, std::uint64_t seed = 0, std::size_t iterations_run = 0,
                            double inertia = 0.0);

    static MotionCodebook fit(std::span<const Vec2> speeds, std::size_t k, std::uint64_t seed,
                              std::size_t max_iters = 300);

    std::size_t size() const noexcept { return centroids_.size(); }
    bool empty() const noexcept { return centroids_.empty(); }
    const std::vector<Vec2>& centroids() const noexcept { return centroids_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t iterations_run() const noexcept { return iterations_; }
    double inertia() const noexcept { return inertia_; }
    const std::vector<double>& inertia_history() const noexcept { return history_; }

    std::size_t quantize(const Vec2& speed) const;
    /// Throws LookupError for an index outside [0, size()).
    const Vec2& dequantize(std::size_t index) const;

   private:
    std::vector<Vec2> centroids_;
    std::uint64_t seed_ = 0;
    std::size_t iterations_ = 0;
    double inertia_ = 0.0;
    std::vector<double> history_;
};

/// Draws from softmax(logits / temperature). A temperature of exactly zero
/// selects the arg-max (lowest index on ties).
std::size_t sample_class(std::span<const double> logits, double temperature, std::mt19937_64& rng);

}  // namespace trajlab
