#include "segwise/experiment.hpp"

#include "segwise/error.hpp"
#include "segwise/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

namespace segwise {

std::string to_string(Generator g) {
    return g == Generator::iid_gaussian_means ? "iid_gaussian_means" : "segmentwise_ar";
}

std::string to_string(Method m) {
    switch (m) {
    case Method::mw:
        return "mw";
    case Method::bs:
        return "bs";
    case Method::quad:
        return "quad";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] < 1.0) || (i > 0 && fractions[i] <= fractions[i - 1])) {
            throw ConfigError("change-point fractions must be strictly increasing inside (0, 1)");
        }
    }
    if (reps < 1) {
        throw ConfigError("reps must be at least 1");
    }
    if (ns.empty()) {
        throw ConfigError("at least one series length is required");
    }
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw ConfigError("noise sd must be finite and non-negative");
    }
    const std::size_t segments = fractions.size() + 1;
    if (generator == Generator::iid_gaussian_means) {
        if (means.size() != segments) {
            throw ConfigError("need one mean vector per segment (" + std::to_string(segments) + ")");
        }
        for (const auto& m : means) {
            if (m.empty() || m.size() != means.front().size()) {
                throw ConfigError("segment means must share one non-zero dimension");
            }
        }
    } else {
        if (!filters.empty() && filters.size() != segments) {
            throw ConfigError("need one AR filter per segment (" + std::to_string(segments) + ")");
        }
        for (const auto& f : filters) {
            if (f.empty() || f.size() != filters.front().size()) {
                throw ConfigError("segment filters must share one order");
            }
        }
    }
    if (method != Method::quad && generator == Generator::iid_gaussian_means && means.front().size() != 1) {
        throw ConfigError(to_string(method) + " needs univariate data");
    }
    penalty.validate();
}

std::vector<std::size_t> change_points_for(const std::vector<double>& fractions, std::size_t n) {
    std::vector<std::size_t> out;
    out.reserve(fractions.size());
    for (const double f : fractions) {
        out.push_back(static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)));
    }
    return out;
}

namespace {

std::vector<std::size_t> segment_bounds(const std::vector<std::size_t>& cps, std::size_t n) {
    std::vector<std::size_t> b{0};
    b.insert(b.end(), cps.begin(), cps.end());
    b.push_back(n);
    for (std::size_t j = 1; j < b.size(); ++j) {
        if (b[j] <= b[j - 1]) {
            throw ConfigError("series of length " + std::to_string(n) + " too short for the change-point fractions");
        }
    }
    return b;
}

} // namespace

GeneratedSeries gen_iid_means(const ExperimentConfig& config, std::size_t n, Rng& rng) {
    const auto cps = change_points_for(config.fractions, n);
    const auto bounds = segment_bounds(cps, n);
    const std::size_t dims = config.means.front().size();
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> values;
    values.reserve(n * dims);
    for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
        for (std::size_t i = bounds[seg]; i < bounds[seg + 1]; ++i) {
            for (std::size_t d = 0; d < dims; ++d) {
                values.push_back(config.means[seg][d] + config.noise_sd * noise(rng));
            }
        }
    }
    return {TimeSeries(std::move(values), dims), cps, {}};
}

GeneratedSeries gen_segmentwise_ar(const ExperimentConfig& config, std::size_t n, Rng& rng) {
    const auto cps = change_points_for(config.fractions, n);
    const auto bounds = segment_bounds(cps, n);
    std::vector<std::vector<double>> filters = config.filters;
    if (filters.empty()) {
        for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
            filters.push_back(sample_stable_filter(config.random_filter_order, rng).coeffs);
        }
    }
    for (const auto& f : filters) {
        if (f.size() > 1 && !is_stable(std::span<const double>(f).subspan(1))) {
            std::cerr << "warning: segment filter is not stable\n";
        }
    }
    const std::size_t order = filters.front().size() - 1;
    const std::size_t burn = config.burn_in.value_or(default_burn_in(order));

    std::vector<double> history;
    extend_ar(history, filters.front(), config.noise_sd, burn, rng);
    for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
        extend_ar(history, filters[seg], config.noise_sd, bounds[seg + 1] - bounds[seg], rng);
    }
    history.erase(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(burn));
    return {TimeSeries(std::move(history)), cps, std::move(filters)};
}

GeneratedSeries generate(const ExperimentConfig& config, std::size_t n, Rng& rng) {
    return config.generator == Generator::iid_gaussian_means ? gen_iid_means(config, n, rng)
                                                             : gen_segmentwise_ar(config, n, rng);
}

std::vector<std::size_t> windows_for(const ExperimentConfig& config, std::size_t n) {
    if (!config.windows.empty()) {
        return config.windows;
    }
    std::vector<std::size_t> out;
    for (const std::size_t divisor : config.window_divisors) {
        const std::size_t w = n / divisor;
        if (w > 2 * config.order && (out.empty() || w < out.back())) {
            out.push_back(w);
        }
    }
    return out;
}

namespace {

std::size_t point_tolerance(const ExperimentConfig& config, std::size_t n) {
    if (config.hit_tolerance) {
        return *config.hit_tolerance;
    }
    if (config.method != Method::quad) {
        const auto w = windows_for(config, n);
        if (!w.empty()) {
            return w.back();
        }
    }
    return static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(n)));
}

std::size_t distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

} // namespace

RunOutcome run_method(const ExperimentConfig& config, const GeneratedSeries& data) {
    RunOutcome out;
    const std::size_t n = data.series.size();
    const auto start = std::chrono::steady_clock::now();
    switch (config.method) {
    case Method::quad: {
        DetectOptions options;
        options.m_max = config.m_max;
        options.penalty = config.penalty;
        options.beta = config.beta;
        options.engine = config.engine;
        options.restarts = config.restarts;
        options.seed = config.seed;
        out.points = detect(data.series, options).change_points;
        break;
    }
    case Method::bs: {
        BsOptions options;
        options.order = config.order;
        options.m_max = config.m_max;
        options.min_len = config.bs_min_len;
        options.penalty = config.penalty;
        out.points = binary_segmentation(data.series.data(), options).change_points;
        break;
    }
    case Method::mw: {
        WindowPlan plan;
        plan.windows = windows_for(config, n);
        plan.tau = config.tau;
        plan.m_max = config.m_max;
        plan.penalty = config.penalty;
        plan.beta = config.beta;
        plan.order = config.order;
        plan.estimator = config.estimator;
        plan.engine = config.engine;
        plan.restarts = config.restarts;
        plan.seed = config.seed;
        out.ranges = mw_detect(data.series.data(), plan).peaks.ranges;
        break;
    }
    }
    out.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (config.method == Method::mw) {
        out.count = out.ranges.size();
        const auto windows = windows_for(config, n);
        const std::size_t narrow = 2 * windows.back();
        for (const std::size_t cp : data.change_points) {
            bool covered = false;
            bool hit = false;
            for (const auto& r : out.ranges) {
                if (r.contains(cp)) {
                    covered = true;
                    hit = hit || r.width() <= narrow;
                }
            }
            out.covered += covered;
            out.hits += hit;
        }
    } else {
        out.count = out.points.size();
        const std::size_t tol = point_tolerance(config, n);
        for (const std::size_t cp : data.change_points) {
            const bool hit = std::any_of(out.points.begin(), out.points.end(),
                                         [&](std::size_t p) { return distance(p, cp) <= tol; });
            out.hits += hit;
            out.covered += hit;
        }
    }
    return out;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentReport report;
    report.config_echo = to_json(config);
    const std::size_t truth = config.fractions.size();

    for (std::size_t ni = 0; ni < config.ns.size(); ++ni) {
        const std::size_t n = config.ns[ni];
        std::vector<RunOutcome> outcomes(config.reps);
        auto run_rep = [&](std::size_t rep) {
            Rng rng = make_rng(config.seed, (static_cast<std::uint64_t>(ni) << 32) | rep);
            const auto data = generate(config, n, rng);
            outcomes[rep] = run_method(config, data);
        };
        if (config.timing) {
            for (std::size_t rep = 0; rep < config.reps; ++rep) {
                run_rep(rep);
            }
        } else {
            parallel_for(config.reps, run_rep);
        }

        NSummary s;
        s.n = n;
        std::size_t under = 0, exact = 0, over = 0, hits = 0, all_covered = 0;
        std::vector<double> times;
        for (const auto& o : outcomes) {
            s.counts.push_back(o.count);
            under += o.count < truth;
            exact += o.count == truth;
            over += o.count > truth;
            hits += o.hits;
            all_covered += o.covered == truth;
            times.push_back(o.millis);
        }
        const double reps = static_cast<double>(config.reps);
        s.f_under = 100.0 * static_cast<double>(under) / reps;
        s.f_exact = 100.0 * static_cast<double>(exact) / reps;
        s.f_over = 100.0 * static_cast<double>(over) / reps;
        s.mean_count = std::accumulate(s.counts.begin(), s.counts.end(), 0.0) / reps;
        double ss = 0.0;
        for (const std::size_t c : s.counts) {
            ss += (static_cast<double>(c) - s.mean_count) * (static_cast<double>(c) - s.mean_count);
        }
        s.sd_count = config.reps > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0;
        s.hit_rate = truth == 0 ? 1.0 : static_cast<double>(hits) / (reps * static_cast<double>(truth));
        s.all_covered_rate = static_cast<double>(all_covered) / reps;
        if (config.timing) {
            s.median_ms = median(times);
        }
        report.per_n.push_back(std::move(s));
    }
    return report;
}

namespace {

nlohmann::json penalty_json(const PenaltySpec& p) {
    return {{"family", to_string(p.family)}, {"multiplier", p.multiplier}, {"rescale_var", p.rescale_by_variance}};
}

} // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["generator"] = to_string(c.generator);
    j["fractions"] = c.fractions;
    if (c.generator == Generator::iid_gaussian_means) {
        j["means"] = c.means;
    } else if (c.filters.empty()) {
        j["filters"] = "random_stable";
        j["random_filter_order"] = c.random_filter_order;
    } else {
        j["filters"] = c.filters;
    }
    j["noise_sd"] = c.noise_sd;
    j["ns"] = c.ns;
    j["reps"] = c.reps;
    j["method"] = to_string(c.method);
    j["order"] = c.order;
    j["m_max"] = c.m_max;
    j["penalty"] = penalty_json(c.penalty);
    j["beta"] = c.beta ? nlohmann::json(*c.beta) : nlohmann::json("auto");
    j["engine"] = c.engine == Engine::dp ? "dp" : "okm";
    if (c.method == Method::mw) {
        j["windows"] = c.windows.empty() ? nlohmann::json{{"divisors", c.window_divisors}} : nlohmann::json(c.windows);
        j["tau"] = c.tau;
        j["estimator"] = c.estimator == Estimator::ls ? "ls" : "yw";
    }
    if (c.method == Method::bs) {
        j["min_len"] = c.bs_min_len == 0 ? default_bs_min_len(c.order) : c.bs_min_len;
    }
    j["seed"] = c.seed;
    return j;
}

nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json per_n = nlohmann::json::array();
    for (const auto& s : report.per_n) {
        per_n.push_back({{"n", s.n},
                         {"f_under", s.f_under},
                         {"f_exact", s.f_exact},
                         {"f_over", s.f_over},
                         {"mean_count", s.mean_count},
                         {"sd_count", s.sd_count},
                         {"hit_rate", s.hit_rate},
                         {"all_covered_rate", s.all_covered_rate},
                         {"median_ms", s.median_ms ? nlohmann::json(*s.median_ms) : nlohmann::json(nullptr)}});
    }
    return {{"config_echo", report.config_echo}, {"per_n", per_n}};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ConfigError("slope fit needs at least two matching points");
    }
    const double k = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= k;
    my /= k;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double TimingTable::slope(Method m) const {
    for (const auto& [method, value] : slopes) {
        if (method == m) {
            return value;
        }
    }
    throw ConfigError("no timing slope recorded for method " + to_string(m));
}

double TimingTable::median_ms(Method m, std::size_t n) const {
    for (const auto& row : rows) {
        if (row.method == m && row.n == n) {
            return row.median_ms;
        }
    }
    throw ConfigError("no timing recorded for " + to_string(m) + " at N = " + std::to_string(n));
}

TimingTable benchmark_runtime(const BenchmarkConfig& config) {
    config.base.validate();
    if (config.reps < 3) {
        throw ConfigError("runtime benchmark needs at least 3 timed repetitions");
    }
    TimingTable table;
    for (const Method method : config.methods) {
        ExperimentConfig run = config.base;
        run.method = method;
        std::vector<double> xs, ys;
        for (std::size_t ni = 0; ni < config.ns.size(); ++ni) {
            const std::size_t n = config.ns[ni];
            Rng rng = make_rng(config.base.seed, ni);
            const auto data = generate(run, n, rng);
            if (config.warmup) {
                run_method(run, data);
            }
            TimingRow row{method, n, 0.0, {}};
            for (std::size_t rep = 0; rep < config.reps; ++rep) {
                row.runs_ms.push_back(run_method(run, data).millis);
            }
            row.median_ms = median(row.runs_ms);
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::max(row.median_ms, 1e-6));
            table.rows.push_back(std::move(row));
        }
        if (xs.size() >= 2) {
            table.slopes.emplace_back(method, loglog_slope(xs, ys));
        }
    }
    return table;
}

nlohmann::json to_json(const TimingTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"method", to_string(r.method)}, {"n", r.n}, {"median_ms", r.median_ms}, {"runs_ms", r.runs_ms}});
    }
    nlohmann::json slopes = nlohmann::json::object();
    for (const auto& [m, s] : table.slopes) {
        slopes[to_string(m)] = s;
    }
    return {{"timings", rows}, {"loglog_slopes", slopes}};
}

} // namespace segwise
