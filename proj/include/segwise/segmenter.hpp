#pragma once

// Penalized change-point detection by minimizing within-segment quadratic loss.
//
// For every candidate count k = 0..m_max the best k-change-point segmentation is
// computed (exact dynamic programming or ordered k-means local search); the
// sweep stops at the first k whose optimum contains a segment shorter than
// beta, and the count minimizing loss + k * penalty is selected.

#include "segwise/series.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace segwise {

enum class PenaltyFamily { constant, loglog, log, custom };

struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::log;
    double multiplier = 1.0;
    bool rescale_by_variance = true;
    std::function<double(std::size_t)> custom; // f(N) for the custom family

    void validate() const;
};

std::string to_string(PenaltyFamily family);

/// Per-change-point penalty: j, j log log n or j log n, times variance_scale
/// when rescaling is enabled.
double penalty_value(const PenaltySpec& spec, std::size_t n, double variance_scale);

/// max(2, ceil(log log n)); 2 for n < 16 where log log n <= 1.
std::size_t default_beta(std::size_t n);

enum class Engine { dp, okm };

struct SegmentFit {
    std::vector<std::size_t> change_points;
    double loss = 0.0;
    bool feasible = true;
};

/// Exact minimum of total quadratic loss over placements of k change points
/// with every segment at least min_len long (min_len <= 1 means unconstrained).
/// Ties resolve to the lexicographically smallest change-point list.
SegmentFit dp_segment(const SeriesStats& stats, std::size_t k, std::size_t min_len = 1);

/// Exact optima for every k = 0..k_max from one dynamic-programming pass.
/// Entries for counts that cannot be placed are marked infeasible.
std::vector<SegmentFit> dp_profile(const SeriesStats& stats, std::size_t k_max, std::size_t min_len = 1);

/// Boundary-shift local search starting from `init`. Each sweep visits the
/// boundaries left to right and tries shifts of 1, 2, 4, ... points in both
/// directions, taking the first strict improvement.
SegmentFit ordered_kmeans(const SeriesStats& stats, std::vector<std::size_t> init, std::size_t min_len = 1,
                          std::size_t max_iter = 1000);

/// k equally spaced boundaries over n points.
std::vector<std::size_t> equally_spaced(std::size_t n, std::size_t k);

struct DetectOptions {
    std::size_t m_max = 10;
    PenaltySpec penalty{};
    std::optional<std::size_t> beta; // default_beta(N) when unset
    Engine engine = Engine::dp;
    bool constrained = false; // enforce beta inside the minimization as well
    std::size_t restarts = 0; // extra random starts for ordered k-means
    std::uint64_t seed = 0;
    std::size_t max_iter = 1000;
};

struct SegmentationProfile {
    std::vector<SegmentFit> fits; // index k
    std::size_t beta = 1;
    Engine engine = Engine::dp;
    /// Largest k admitted by the minimum-segment check, -1 when none.
    long ceiling = -1;
};

SegmentationProfile build_profile(const SeriesStats& stats, const DetectOptions& options);

struct DetectionResult {
    std::size_t m_hat = 0;
    std::vector<std::size_t> change_points;
    std::vector<double> losses;         // e_0 .. e_M over admitted counts
    std::vector<double> penalty_values; // k * f_scaled(N)
    double penalty = 0.0;               // f_scaled(N)
    double variance_scale = 1.0;
    std::size_t beta = 1;
    std::vector<std::vector<std::size_t>> candidates; // best change points per admitted k

    friend bool operator==(const DetectionResult&, const DetectionResult&) = default;
};

/// Selects the admitted k minimizing losses[k] + k * penalty; ties go to the smaller k.
std::size_t select_count(const std::vector<double>& losses, double penalty);

DetectionResult detect(const TimeSeries& series, const DetectOptions& options);

} // namespace segwise
