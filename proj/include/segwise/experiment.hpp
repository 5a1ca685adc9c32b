#pragma once

// Synthetic data generators and the Monte Carlo experiment / runtime harness.

#include "segwise/baselines.hpp"
#include "segwise/multiwindow.hpp"
#include "segwise/segmenter.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace segwise {

enum class Generator { iid_gaussian_means, segmentwise_ar };
enum class Method { mw, bs, quad };

std::string to_string(Generator g);
std::string to_string(Method m);

struct ExperimentConfig {
    Generator generator = Generator::iid_gaussian_means;
    std::vector<double> fractions{0.2, 0.8}; // relative change-point positions
    std::vector<std::vector<double>> means{{-1.0}, {0.0}, {1.0}}; // per segment, D values each
    /// Per-segment AR coefficients [intercept, psi_1..psi_L]; empty draws random
    /// stable zero-intercept filters of `random_filter_order` for every rep.
    std::vector<std::vector<double>> filters;
    std::size_t random_filter_order = 2;
    double noise_sd = 1.0;
    std::optional<std::size_t> burn_in; // default_burn_in(L) when unset

    std::vector<std::size_t> ns{100, 300, 1000};
    std::size_t reps = 100;
    Method method = Method::quad;

    // Detector parameters shared by the methods that use them.
    std::size_t order = 2;
    std::size_t m_max = 10;
    PenaltySpec penalty{PenaltyFamily::log, 2.0, true, {}};
    std::optional<std::size_t> beta;
    Engine engine = Engine::dp;
    std::size_t restarts = 0;
    std::vector<std::size_t> windows;                        // explicit MW windows
    std::vector<std::size_t> window_divisors{10, 20, 50, 100}; // used when windows is empty
    std::size_t tau = 1;
    Estimator estimator = Estimator::ls;
    std::size_t bs_min_len = 0;
    /// Distance within which a point estimate counts as a hit for bs/quad;
    /// defaults to the smallest window when windows apply, else ceil(0.01 N).
    std::optional<std::size_t> hit_tolerance;

    std::uint64_t seed = 0;
    bool timing = false;

    void validate() const;
};

/// Boundaries floor(f * N) for every relative position f.
std::vector<std::size_t> change_points_for(const std::vector<double>& fractions, std::size_t n);

struct GeneratedSeries {
    TimeSeries series;
    std::vector<std::size_t> change_points;
    std::vector<std::vector<double>> filters; // per-segment AR coefficients (AR generator only)
};

GeneratedSeries gen_iid_means(const ExperimentConfig& config, std::size_t n, Rng& rng);

/// Segments follow their own filter; each segment's recursion starts from the
/// previous segment's last L values. Burn-in uses the first filter.
GeneratedSeries gen_segmentwise_ar(const ExperimentConfig& config, std::size_t n, Rng& rng);

GeneratedSeries generate(const ExperimentConfig& config, std::size_t n, Rng& rng);

/// Windows used for a series of length n: explicit windows, else floor(n / divisor).
std::vector<std::size_t> windows_for(const ExperimentConfig& config, std::size_t n);

struct RunOutcome {
    std::size_t count = 0;              // detected change points or ranges
    std::vector<std::size_t> points;    // point estimates (bs, quad)
    std::vector<Range> ranges;          // mw ranges
    std::size_t hits = 0;               // true points counted as detected
    std::size_t covered = 0;            // true points inside some range / within tolerance
    double millis = 0.0;
};

/// Runs the configured method once on `data` and scores it against the truth.
RunOutcome run_method(const ExperimentConfig& config, const GeneratedSeries& data);

struct NSummary {
    std::size_t n = 0;
    double f_under = 0.0; // percent of reps with fewer detections than true points
    double f_exact = 0.0;
    double f_over = 0.0;
    double mean_count = 0.0;
    double sd_count = 0.0;
    double hit_rate = 0.0;         // fraction of true points hit
    double all_covered_rate = 0.0; // fraction of reps covering every true point
    std::optional<double> median_ms;
    std::vector<std::size_t> counts; // per rep
};

struct ExperimentReport {
    nlohmann::json config_echo;
    std::vector<NSummary> per_n;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentReport& report);

struct BenchmarkConfig {
    ExperimentConfig base; // generator and method parameters; base.method is ignored
    std::vector<Method> methods{Method::mw, Method::bs};
    std::vector<std::size_t> ns{1000, 10000, 50000};
    std::size_t reps = 3;
    bool warmup = true;
};

struct TimingRow {
    Method method = Method::mw;
    std::size_t n = 0;
    double median_ms = 0.0;
    std::vector<double> runs_ms;
};

struct TimingTable {
    std::vector<TimingRow> rows;
    std::vector<std::pair<Method, double>> slopes; // least-squares slope of log time on log N

    double slope(Method m) const;
    double median_ms(Method m, std::size_t n) const;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

TimingTable benchmark_runtime(const BenchmarkConfig& config);

nlohmann::json to_json(const TimingTable& table);

} // namespace segwise
