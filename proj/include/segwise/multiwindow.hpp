#pragma once

// Multi-window change detection for segment-wise autoregressive series.
//
// For each window size the series is cut into disjoint windows, an AR filter is
// fitted per window, and the quadratic-loss detector runs on the resulting
// sequence of (L+1)-dimensional filter estimates. Every detected feature
// boundary l marks the original indices [(l-1)w+1, (l+1)w] with one score
// point per round; the final ranges are the runs whose score stays within
// tau of the overall maximum.

#include "segwise/ar.hpp"
#include "segwise/segmenter.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace segwise {

struct WindowPlan {
    std::vector<std::size_t> windows; // strictly decreasing
    std::size_t tau = 1;
    std::size_t m_max = 5;
    PenaltySpec penalty{};
    std::optional<std::size_t> beta; // per-round default_beta(N_r) when unset
    std::size_t order = 2;
    Estimator estimator = Estimator::ls;
    Engine engine = Engine::dp;
    std::size_t restarts = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// floor(N / {10, 20, 50, 100}), keeping sizes above 2L, strictly decreasing.
std::vector<std::size_t> default_windows(std::size_t n, std::size_t order);

struct ScoreRound {
    std::size_t window = 0;
    bool skipped = false;
    std::vector<std::size_t> detected; // feature-scale boundaries l (1-based last feature of a segment)
    std::vector<int> scores;           // cumulative s^(r)_n, index n-1
};

struct ScoreBoard {
    std::size_t n = 0;
    std::vector<ScoreRound> rounds;

    explicit ScoreBoard(std::size_t length = 0) : n(length) {}

    std::span<const int> scores(std::size_t round) const { return rounds[round].scores; }
    /// Scores after the last round (all zero before any round).
    std::vector<int> final_scores() const;
    int max_score() const;
};

/// Appends one round: indices in the union of [(l-1)w+1, (l+1)w], clipped to
/// [1, N], gain exactly one point over the previous round.
ScoreBoard score_round(ScoreBoard board, std::span<const std::size_t> detected, std::size_t window);

struct Range {
    std::size_t first = 0; // 1-based, inclusive
    std::size_t last = 0;  // 1-based, inclusive

    std::size_t width() const { return last - first + 1; }
    bool contains(std::size_t index) const { return first <= index && index <= last; }
    friend bool operator==(const Range&, const Range&) = default;
};

struct PeakRanges {
    std::vector<Range> ranges;
    int threshold = 0;        // score level ranges were cut at
    std::size_t round = 0;    // 1-based round whose scores produced the ranges, 0 if none
    bool truncated = false;   // no round met the m_max limit
};

/// Maximal runs of `scores` at or above `threshold`, as 1-based closed ranges.
std::vector<Range> runs_at_least(std::span<const int> scores, int threshold);

/// Backward scan over rounds R..1 for the first whose runs at or above S - tau
/// number at most m_max, S being the final round's maximum.
PeakRanges select_peaks(const ScoreBoard& board, std::size_t tau, std::size_t m_max);

struct MwResult {
    PeakRanges peaks;
    ScoreBoard board;
};

MwResult mw_detect(std::span<const double> y, const WindowPlan& plan);

} // namespace segwise
