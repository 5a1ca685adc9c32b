#include "segwise/multiwindow.hpp"

#include "segwise/error.hpp"

#include <algorithm>
#include <iostream>
#include <string>
#include <tuple>

namespace segwise {

void WindowPlan::validate() const {
    if (windows.empty()) {
        throw ConfigError("window plan needs at least one window");
    }
    for (std::size_t r = 0; r < windows.size(); ++r) {
        if (windows[r] <= 2 * order) {
            throw ConfigError("window " + std::to_string(windows[r]) + " must exceed twice the AR order "
                              + std::to_string(order));
        }
        if (r > 0 && windows[r] >= windows[r - 1]) {
            throw ConfigError("windows must be strictly decreasing");
        }
    }
    if (beta && *beta < 1) {
        throw ConfigError("beta must be at least 1");
    }
    penalty.validate();
}

std::vector<std::size_t> default_windows(std::size_t n, std::size_t order) {
    std::vector<std::size_t> out;
    for (const std::size_t divisor : {10, 20, 50, 100}) {
        const std::size_t w = n / divisor;
        if (w > 2 * order && (out.empty() || w < out.back())) {
            out.push_back(w);
        }
    }
    return out;
}

std::vector<int> ScoreBoard::final_scores() const {
    if (rounds.empty()) {
        return std::vector<int>(n, 0);
    }
    return rounds.back().scores;
}

int ScoreBoard::max_score() const {
    if (rounds.empty() || n == 0) {
        return 0;
    }
    const auto& s = rounds.back().scores;
    return *std::max_element(s.begin(), s.end());
}

ScoreBoard score_round(ScoreBoard board, std::span<const std::size_t> detected, std::size_t window) {
    ScoreRound round;
    round.window = window;
    round.detected.assign(detected.begin(), detected.end());
    round.scores = board.final_scores();

    std::vector<char> marked(board.n, 0);
    for (const std::size_t l : detected) {
        // [(l-1)w+1, (l+1)w] in 1-based terms is [(l-1)w, (l+1)w) 0-based.
        const std::size_t lo = l == 0 ? 0 : (l - 1) * window;
        const std::size_t hi = std::min(board.n, (l + 1) * window);
        for (std::size_t i = lo; i < hi; ++i) {
            marked[i] = 1;
        }
    }
    for (std::size_t i = 0; i < board.n; ++i) {
        round.scores[i] += marked[i];
    }
    board.rounds.push_back(std::move(round));
    return board;
}

std::vector<Range> runs_at_least(std::span<const int> scores, int threshold) {
    std::vector<Range> out;
    std::size_t i = 0;
    while (i < scores.size()) {
        if (scores[i] < threshold) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < scores.size() && scores[j + 1] >= threshold) {
            ++j;
        }
        out.push_back(Range{i + 1, j + 1});
        i = j + 1;
    }
    return out;
}

PeakRanges select_peaks(const ScoreBoard& board, std::size_t tau, std::size_t m_max) {
    PeakRanges out;
    const int top = board.max_score();
    if (top == 0) {
        return out;
    }
    // Zero-score indices carry no evidence, so the cut never drops below 1.
    out.threshold = std::max(1, top - static_cast<int>(tau));

    for (std::size_t r = board.rounds.size(); r-- > 0;) {
        auto runs = runs_at_least(board.scores(r), out.threshold);
        if (runs.size() <= m_max) {
            out.ranges = std::move(runs);
            out.round = r + 1;
            return out;
        }
    }

    // Every round exceeds m_max: keep the best runs of the first round.
    const auto scores = board.scores(0);
    auto runs = runs_at_least(scores, out.threshold);
    auto peak = [&](const Range& rg) {
        return *std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(rg.first - 1),
                                 scores.begin() + static_cast<std::ptrdiff_t>(rg.last));
    };
    std::stable_sort(runs.begin(), runs.end(), [&](const Range& a, const Range& b) {
        return std::make_tuple(-peak(a), a.width(), a.first) < std::make_tuple(-peak(b), b.width(), b.first);
    });
    runs.resize(std::min(runs.size(), m_max));
    std::sort(runs.begin(), runs.end(), [](const Range& a, const Range& b) { return a.first < b.first; });
    out.ranges = std::move(runs);
    out.round = 1;
    out.truncated = true;
    return out;
}

MwResult mw_detect(std::span<const double> y, const WindowPlan& plan) {
    plan.validate();
    const std::size_t n = y.size();
    if (n < plan.windows.front()) {
        throw DataError("series of length " + std::to_string(n) + " is shorter than the largest window "
                        + std::to_string(plan.windows.front()));
    }

    ScoreBoard board(n);
    bool any_informative = false;
    for (const std::size_t w : plan.windows) {
        const std::size_t features = n / w;
        // Under beta >= 2 fewer than three features cannot host a change.
        if (features < 3) {
            std::cerr << "warning: window " << w << " leaves " << features << " feature(s); round skipped\n";
            board = score_round(std::move(board), {}, w);
            board.rounds.back().skipped = true;
            continue;
        }
        const auto seq = window_features(y, w, plan.order, plan.estimator);
        if (seq.degenerate_count < seq.filters.size()) {
            any_informative = true;
        }
        DetectOptions options;
        options.m_max = plan.m_max;
        options.penalty = plan.penalty;
        options.beta = plan.beta.value_or(default_beta(features));
        options.engine = plan.engine;
        options.restarts = plan.restarts;
        options.seed = plan.seed;
        const auto found = detect(seq.as_series(), options);
        board = score_round(std::move(board), found.change_points, w);
    }
    if (!any_informative) {
        throw DataError("every window produced a degenerate AR fit");
    }

    MwResult out{select_peaks(board, plan.tau, plan.m_max), std::move(board)};
    return out;
}

} // namespace segwise
