#include "segwise/segmenter.hpp"

#include "segwise/error.hpp"
#include "segwise/random.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

namespace segwise {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Loss of (a, b] without range checks; the DP inner loop calls this O(kN^2) times.
inline double segment_loss(const SeriesStats& stats, std::size_t a, std::size_t b) {
    if (b - a == 1) {
        return 0.0;
    }
    const auto hi = stats.cumsum(b);
    const auto lo = stats.cumsum(a);
    double sum_sq = 0.0;
    for (std::size_t d = 0; d < hi.size(); ++d) {
        const double s = hi[d] - lo[d];
        sum_sq += s * s;
    }
    return std::max(0.0, (stats.cumsq(b) - stats.cumsq(a)) - sum_sq / static_cast<double>(b - a));
}

bool better(const SegmentFit& lhs, const SegmentFit& rhs) {
    if (lhs.loss != rhs.loss) {
        return lhs.loss < rhs.loss;
    }
    return lhs.change_points < rhs.change_points;
}

} // namespace

void PenaltySpec::validate() const {
    if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
        throw ConfigError("penalty multiplier must be finite and positive");
    }
    if (family == PenaltyFamily::custom && !custom) {
        throw ConfigError("custom penalty family requires a penalty function");
    }
}

std::string to_string(PenaltyFamily family) {
    switch (family) {
    case PenaltyFamily::constant:
        return "constant";
    case PenaltyFamily::loglog:
        return "loglog";
    case PenaltyFamily::log:
        return "log";
    case PenaltyFamily::custom:
        return "custom";
    }
    return "unknown";
}

double penalty_value(const PenaltySpec& spec, std::size_t n, double variance_scale) {
    spec.validate();
    double base = 0.0;
    switch (spec.family) {
    case PenaltyFamily::constant:
        base = spec.multiplier;
        break;
    case PenaltyFamily::loglog:
        if (n < 3) {
            throw ConfigError("log log penalty requires N >= 3, got N = " + std::to_string(n));
        }
        base = spec.multiplier * std::log(std::log(static_cast<double>(n)));
        break;
    case PenaltyFamily::log:
        if (n < 1) {
            throw ConfigError("log penalty requires N >= 1");
        }
        base = spec.multiplier * std::log(static_cast<double>(n));
        break;
    case PenaltyFamily::custom:
        base = spec.multiplier * spec.custom(n);
        break;
    }
    if (!std::isfinite(base) || base < 0.0) {
        throw ConfigError("penalty evaluated to a negative or non-finite value");
    }
    return spec.rescale_by_variance ? base * variance_scale : base;
}

std::size_t default_beta(std::size_t n) {
    if (n < 3) {
        return 2;
    }
    const double ll = std::log(std::log(static_cast<double>(n)));
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(ll)));
}

std::vector<SegmentFit> dp_profile(const SeriesStats& stats, std::size_t k_max, std::size_t min_len) {
    const std::size_t n = stats.size();
    if (n == 0) {
        throw DataError("cannot segment an empty series");
    }
    const std::size_t ml = std::max<std::size_t>(min_len, 1);

    // best[j][m]: minimal loss of (m, n] split into j + 1 segments; next[j][m]
    // the smallest end of the first of those segments.
    std::vector<std::vector<double>> best(k_max + 1, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> next(k_max + 1, std::vector<std::size_t>(n + 1, n));

    for (std::size_t m = 0; m + ml <= n; ++m) {
        best[0][m] = segment_loss(stats, m, n);
    }
    for (std::size_t j = 1; j <= k_max; ++j) {
        if ((j + 1) * ml > n) {
            break;
        }
        const std::size_t last_start = n - (j + 1) * ml;
        for (std::size_t m = 0; m <= last_start; ++m) {
            double best_val = inf;
            std::size_t best_p = n;
            const std::size_t p_hi = n - j * ml;
            for (std::size_t p = m + ml; p <= p_hi; ++p) {
                const double tail = best[j - 1][p];
                if (tail == inf) {
                    continue;
                }
                const double val = segment_loss(stats, m, p) + tail;
                if (val < best_val) {
                    best_val = val;
                    best_p = p;
                }
            }
            best[j][m] = best_val;
            next[j][m] = best_p;
        }
    }

    std::vector<SegmentFit> out(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) {
        auto& fit = out[k];
        if (best[k][0] == inf) {
            fit.feasible = false;
            fit.loss = inf;
            continue;
        }
        std::size_t pos = 0;
        for (std::size_t j = k; j > 0; --j) {
            pos = next[j][pos];
            fit.change_points.push_back(pos);
        }
        fit.loss = total_loss(stats, fit.change_points);
    }
    return out;
}

SegmentFit dp_segment(const SeriesStats& stats, std::size_t k, std::size_t min_len) {
    return dp_profile(stats, k, min_len)[k];
}

std::vector<std::size_t> equally_spaced(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t j = 1; j <= k; ++j) {
        out.push_back(j * n / (k + 1));
    }
    return out;
}

SegmentFit ordered_kmeans(const SeriesStats& stats, std::vector<std::size_t> init, std::size_t min_len,
                          std::size_t max_iter) {
    const std::size_t n = stats.size();
    const std::size_t ml = std::max<std::size_t>(min_len, 1);
    Segmentation start(n, init); // validates ordering and range

    SegmentFit initial{init, total_loss(stats, init), true};
    auto& cps = init;
    const std::size_t k = cps.size();

    for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
        bool moved = false;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t a = i == 0 ? 0 : cps[i - 1];
            const std::size_t b = i + 1 == k ? n : cps[i + 1];
            const std::size_t m = cps[i];
            const std::size_t max_left = m - a > ml ? m - a - ml : 0;
            const std::size_t max_right = b - m > ml ? b - m - ml : 0;
            for (std::size_t t = 1; t <= std::max(max_left, max_right); t *= 2) {
                if (t <= max_left && shift_improves(stats, a, m, b, t)) {
                    cps[i] = m - t;
                    moved = true;
                    break;
                }
                if (t <= max_right && shift_right_improves(stats, a, m, b, t)) {
                    cps[i] = m + t;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            break;
        }
    }

    SegmentFit result{cps, total_loss(stats, cps), true};
    if (result.loss > initial.loss) {
        return initial;
    }
    return result;
}

namespace {

// k distinct ordered boundaries with every segment at least ml long, or nullopt.
std::optional<std::vector<std::size_t>> random_boundaries(std::size_t n, std::size_t k, std::size_t ml, Rng& rng) {
    if ((k + 1) * ml > n) {
        return std::nullopt;
    }
    // Sample gaps: choose k points among n - (k+1)*ml + k slots, then re-inflate.
    const std::size_t slack = n - (k + 1) * ml;
    std::vector<std::size_t> slots(slack + k);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    picked.reserve(k);
    std::sample(slots.begin(), slots.end(), std::back_inserter(picked), static_cast<std::ptrdiff_t>(k), rng);
    for (std::size_t j = 0; j < k; ++j) {
        // picked[j] - j gaps of free slack before boundary j
        picked[j] = picked[j] - j + (j + 1) * ml;
    }
    return picked;
}

SegmentFit okm_best(const SeriesStats& stats, std::size_t k, std::size_t ml, const DetectOptions& options) {
    const std::size_t n = stats.size();
    if (k == 0) {
        return SegmentFit{{}, total_loss(stats, std::vector<std::size_t>{}), true};
    }
    if ((k + 1) * ml > n) {
        return SegmentFit{{}, inf, false};
    }
    std::vector<std::vector<std::size_t>> starts;
    auto even = equally_spaced(n, k);
    if (Segmentation(n, even).min_segment_length() >= ml) {
        starts.push_back(std::move(even));
    }
    Rng rng = make_rng(options.seed, k);
    for (std::size_t r = 0; r < options.restarts || starts.empty(); ++r) {
        if (auto b = random_boundaries(n, k, ml, rng)) {
            starts.push_back(std::move(*b));
        }
        if (r > options.restarts + 8) {
            break;
        }
    }
    SegmentFit best{{}, inf, false};
    for (auto& s : starts) {
        auto fit = ordered_kmeans(stats, std::move(s), ml, options.max_iter);
        if (!best.feasible || better(fit, best)) {
            best = std::move(fit);
        }
    }
    return best;
}

} // namespace

SegmentationProfile build_profile(const SeriesStats& stats, const DetectOptions& options) {
    const std::size_t n = stats.size();
    if (n == 0) {
        throw DataError("cannot segment an empty series");
    }
    SegmentationProfile profile;
    profile.engine = options.engine;
    profile.beta = options.beta.value_or(default_beta(n));
    if (profile.beta < 1) {
        throw ConfigError("beta must be at least 1");
    }
    const std::size_t k_max = std::min(options.m_max, n - 1);
    const std::size_t ml = options.constrained ? profile.beta : 1;

    std::vector<SegmentFit> dp_fits;
    if (options.engine == Engine::dp) {
        dp_fits = dp_profile(stats, k_max, ml);
    }
    for (std::size_t k = 0; k <= k_max; ++k) {
        SegmentFit fit = options.engine == Engine::dp ? std::move(dp_fits[k]) : okm_best(stats, k, ml, options);
        const bool too_short =
            !fit.feasible || Segmentation(n, fit.change_points).min_segment_length() < profile.beta;
        profile.fits.push_back(std::move(fit));
        if (too_short) {
            break;
        }
        profile.ceiling = static_cast<long>(k);
    }
    return profile;
}

std::size_t select_count(const std::vector<double>& losses, double penalty) {
    std::size_t best_k = 0;
    double best_val = inf;
    for (std::size_t k = 0; k < losses.size(); ++k) {
        const double val = losses[k] + static_cast<double>(k) * penalty;
        if (val < best_val) {
            best_val = val;
            best_k = k;
        }
    }
    return best_k;
}

DetectionResult detect(const TimeSeries& series, const DetectOptions& options) {
    if (series.empty()) {
        throw DataError("cannot run detection on an empty series");
    }
    options.penalty.validate();
    const SeriesStats stats(series);
    const auto profile = build_profile(stats, options);

    DetectionResult out;
    out.beta = profile.beta;
    out.variance_scale = options.penalty.rescale_by_variance ? mean_variance(series) : 1.0;
    out.penalty = penalty_value(options.penalty, series.size(), out.variance_scale);

    // k = 0 is always a candidate, even when the whole series is shorter than beta.
    const std::size_t admitted = profile.ceiling < 0 ? 1 : static_cast<std::size_t>(profile.ceiling) + 1;
    for (std::size_t k = 0; k < admitted; ++k) {
        out.losses.push_back(profile.fits[k].loss);
        out.penalty_values.push_back(static_cast<double>(k) * out.penalty);
        out.candidates.push_back(profile.fits[k].change_points);
    }
    out.m_hat = select_count(out.losses, out.penalty);
    out.change_points = out.candidates[out.m_hat];
    return out;
}

} // namespace segwise
