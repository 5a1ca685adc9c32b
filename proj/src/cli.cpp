#include "segwise/cli.hpp"

#include "segwise/ar.hpp"
#include "segwise/baselines.hpp"
#include "segwise/error.hpp"
#include "segwise/experiment.hpp"
#include "segwise/multiwindow.hpp"
#include "segwise/segmenter.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <unistd.h>

namespace segwise::cli {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) {
        return std::nullopt;
    }
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (*begin == '+') {
        ++begin;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        return std::nullopt;
    }
    return value;
}

struct Record {
    std::size_t line = 0; // 1-based line the record starts on
    std::vector<std::string> cells;
};

// RFC-4180 style reader: quoted cells may contain commas, doubled quotes and
// line breaks. Blank lines are dropped.
std::vector<Record> read_records(std::string text) {
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        text.erase(0, 3);
    }
    std::vector<Record> out;
    Record current;
    std::string cell;
    bool quoted = false;
    bool was_quoted = false;
    std::size_t line = 1;
    current.line = 1;

    auto end_cell = [&] {
        current.cells.push_back(was_quoted ? cell : trim(cell));
        cell.clear();
        was_quoted = false;
    };
    auto end_record = [&] {
        end_cell();
        const bool blank = current.cells.size() == 1 && current.cells.front().empty();
        if (!blank) {
            out.push_back(std::move(current));
        }
        current = Record{};
        current.line = line + 1;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (trim(cell).empty()) {
                cell.clear();
                quoted = true;
                was_quoted = true;
            } else {
                cell.push_back(c);
            }
            break;
        case ',':
            end_cell();
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            break;
        default:
            cell.push_back(c);
        }
    }
    if (quoted) {
        throw DataError("line " + std::to_string(current.line) + ": unterminated quoted cell");
    }
    if (!cell.empty() || !current.cells.empty()) {
        end_record();
    }
    return out;
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

} // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    auto records = read_records(line);
    if (records.empty()) {
        return {""};
    }
    return std::move(records.front().cells);
}

TimeSeries parse_csv(std::istream& in, const std::vector<std::string>& columns, std::optional<bool> header) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto records = read_records(std::move(text));
    if (records.empty()) {
        throw DataError("input has no rows");
    }

    bool has_header = false;
    if (header) {
        has_header = *header;
    } else {
        has_header = std::any_of(records.front().cells.begin(), records.front().cells.end(),
                                 [](const std::string& c) { return !parse_number(c); });
    }
    const std::size_t width = records.front().cells.size();

    std::vector<std::size_t> selected;
    if (columns.empty()) {
        for (std::size_t c = 0; c < width; ++c) {
            selected.push_back(c);
        }
    }
    for (const auto& name : columns) {
        const std::string key = trim(name);
        std::optional<std::size_t> index;
        if (has_header) {
            const auto& names = records.front().cells;
            const auto it = std::find(names.begin(), names.end(), key);
            if (it != names.end()) {
                index = static_cast<std::size_t>(it - names.begin());
            }
        }
        if (!index && all_digits(key)) {
            index = std::stoul(key);
        }
        if (!index) {
            throw ConfigError("unknown column '" + key + "'");
        }
        if (*index >= width) {
            throw ConfigError("column index " + std::to_string(*index) + " out of range (" + std::to_string(width) +
                              " columns)");
        }
        selected.push_back(*index);
    }
    if (selected.empty()) {
        throw ConfigError("empty column selection");
    }

    const std::size_t first = has_header ? 1 : 0;
    if (records.size() <= first) {
        throw DataError("input has no data rows");
    }
    std::vector<double> values;
    values.reserve((records.size() - first) * selected.size());
    for (std::size_t r = first; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (const std::size_t c : selected) {
            if (c >= rec.cells.size()) {
                throw DataError("line " + std::to_string(rec.line) + ": missing column " + std::to_string(c));
            }
            const auto v = parse_number(rec.cells[c]);
            if (!v) {
                throw DataError("line " + std::to_string(rec.line) + ": non-numeric cell '" + rec.cells[c] + "'");
            }
            if (!std::isfinite(*v)) {
                throw DataError("line " + std::to_string(rec.line) + ": non-finite cell '" + trim(rec.cells[c]) +
                                "'");
            }
            values.push_back(*v);
        }
    }
    return TimeSeries(std::move(values), selected.size());
}

TimeSeries ingest_csv(const std::string& path, const std::vector<std::string>& columns, std::optional<bool> header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return parse_csv(in, columns, header);
}

namespace {

// Everything any subcommand may read from the command line.
struct RunConfig {
    std::string input;
    std::vector<std::string> columns;
    std::optional<bool> header;
    std::string output;
    std::string format;

    std::size_t order = 2;
    bool allow_order_zero = false;
    std::optional<std::size_t> m_max;
    std::optional<std::string> penalty;
    bool rescale = true;
    std::string beta = "auto";
    std::string windows = "auto";
    std::size_t tau = 1;
    std::string engine = "dp";
    std::size_t restarts = 0;
    std::optional<std::uint64_t> seed;
    bool emit_scores = false;
    bool constrained = false;
    std::string estimator = "ls";
    std::size_t min_len = 0;
    std::size_t max_lag = 10;

    std::string generator;
    std::size_t n = 0;
    std::vector<std::size_t> ns;
    std::string fractions;
    std::string means;
    std::string filters;
    std::size_t random_order = 2;
    double noise_sd = 1.0;
    std::optional<std::size_t> burn_in;
    std::optional<std::size_t> reps;
    std::string method = "quad";
    std::string methods = "mw,bs";
    bool no_warmup = false;
    bool timing = false;
    std::optional<std::size_t> hit_tolerance;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep)) {
        out.push_back(trim(part));
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    const auto v = parse_number(s);
    if (!v || !std::isfinite(*v)) {
        throw ConfigError("invalid number '" + s + "' in " + what);
    }
    return *v;
}

std::size_t to_size(const std::string& s, const std::string& what) {
    if (!all_digits(s)) {
        throw ConfigError("invalid count '" + s + "' in " + what);
    }
    return std::stoul(s);
}

std::vector<double> doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& p : split(s, ',')) {
        out.push_back(to_double(p, what));
    }
    return out;
}

std::vector<std::vector<double>> double_rows(const std::string& s, const std::string& what) {
    std::vector<std::vector<double>> out;
    for (const auto& row : split(s, ';')) {
        out.push_back(doubles(row, what));
    }
    return out;
}

std::vector<std::size_t> sizes(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    for (const auto& p : split(s, ',')) {
        out.push_back(to_size(p, what));
    }
    return out;
}

PenaltySpec parse_penalty(const std::optional<std::string>& text, PenaltySpec spec, bool rescale) {
    spec.rescale_by_variance = rescale;
    if (!text) {
        return spec;
    }
    const auto parts = split(*text, ':');
    const std::string& family = parts.front();
    if (family == "aic" || family == "constant") {
        spec.family = PenaltyFamily::constant;
    } else if (family == "hq" || family == "loglog") {
        spec.family = PenaltyFamily::loglog;
    } else if (family == "bic" || family == "log") {
        spec.family = PenaltyFamily::log;
    } else if (family == "custom") {
        spec.family = PenaltyFamily::custom;
    } else {
        throw ConfigError("unknown penalty family '" + family + "'");
    }
    const std::size_t expected = spec.family == PenaltyFamily::custom ? 3 : 2;
    if (parts.size() != expected && !(expected == 2 && parts.size() == 1)) {
        throw ConfigError(spec.family == PenaltyFamily::custom ? "custom penalty takes the form custom:<j>:<power>"
                                                               : "penalty takes the form <family>:<j>");
    }
    spec.multiplier = parts.size() > 1 ? to_double(parts[1], "--penalty") : 1.0;
    spec.custom = nullptr;
    if (spec.family == PenaltyFamily::custom) {
        const double power = to_double(parts[2], "--penalty");
        spec.custom = [power](std::size_t n) { return std::pow(static_cast<double>(n), power); };
    }
    spec.validate();
    return spec;
}

std::optional<std::size_t> parse_beta(const std::string& s) {
    if (s == "auto") {
        return std::nullopt;
    }
    const std::size_t b = to_size(s, "--beta");
    if (b < 1) {
        throw ConfigError("--beta must be at least 1");
    }
    return b;
}

Engine parse_engine(const std::string& s) {
    if (s == "dp") {
        return Engine::dp;
    }
    if (s == "okm") {
        return Engine::okm;
    }
    throw ConfigError("unknown engine '" + s + "'");
}

Estimator parse_estimator(const std::string& s) {
    if (s == "ls") {
        return Estimator::ls;
    }
    if (s == "yw") {
        return Estimator::yw;
    }
    throw ConfigError("unknown estimator '" + s + "'");
}

Method parse_method(const std::string& s) {
    if (s == "mw") {
        return Method::mw;
    }
    if (s == "bs") {
        return Method::bs;
    }
    if (s == "quad" || s == "detect") {
        return Method::quad;
    }
    throw ConfigError("unknown method '" + s + "'");
}

std::uint64_t require_seed(const RunConfig& rc, const std::string& command) {
    if (!rc.seed) {
        throw ConfigError(command + " is randomized and requires --seed");
    }
    return *rc.seed;
}

std::span<const double> univariate(const TimeSeries& series, const std::string& command) {
    if (series.dims() != 1) {
        throw ConfigError(command + " needs exactly one column, got " + std::to_string(series.dims()) +
                          " (use --columns)");
    }
    return series.data();
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string penalty_text(const PenaltySpec& p) { return to_string(p.family) + ":" + fmt(p.multiplier); }

json envelope(const RunConfig& rc, json params, json result) {
    json meta{{"version", version}, {"params", std::move(params)}};
    meta["seed"] = rc.seed ? json(*rc.seed) : json(nullptr);
    return json{{"meta", std::move(meta)}, {"result", std::move(result)}};
}

json ranges_json(const std::vector<Range>& ranges) {
    json out = json::array();
    for (const auto& r : ranges) {
        out.push_back({r.first, r.last});
    }
    return out;
}

TimeSeries load_input(const RunConfig& rc) {
    if (rc.input.empty()) {
        throw ConfigError("--input is required");
    }
    return ingest_csv(rc.input, rc.columns, rc.header);
}

// ---- subcommands: each returns the rendered artifact ----

std::string cmd_detect(const RunConfig& rc) {
    DetectOptions options;
    options.m_max = rc.m_max.value_or(options.m_max);
    options.penalty = parse_penalty(rc.penalty, options.penalty, rc.rescale);
    options.beta = parse_beta(rc.beta);
    options.engine = parse_engine(rc.engine);
    options.constrained = rc.constrained;
    options.restarts = rc.restarts;
    if (options.engine == Engine::okm && options.restarts > 0) {
        options.seed = require_seed(rc, "okm with restarts");
    }
    const TimeSeries series = load_input(rc);
    const DetectionResult res = detect(series, options);

    if (rc.format == "csv") {
        std::string out = "change_point\n";
        for (const auto cp : res.change_points) {
            out += std::to_string(cp) + "\n";
        }
        return out;
    }
    json params{{"input", rc.input},          {"n", series.size()},
                {"dims", series.dims()},      {"m_max", options.m_max},
                {"penalty", penalty_text(options.penalty)}, {"rescale_var", options.penalty.rescale_by_variance},
                {"beta", res.beta},           {"engine", rc.engine},
                {"constrained", rc.constrained}, {"restarts", options.restarts}};
    json result{{"m_hat", res.m_hat},
                {"change_points", res.change_points},
                {"losses", res.losses},
                {"penalty", res.penalty},
                {"penalty_values", res.penalty_values},
                {"variance_scale", res.variance_scale},
                {"beta", res.beta},
                {"candidates", res.candidates}};
    return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
}

std::string cmd_mw(const RunConfig& rc) {
    if (rc.order == 0 && !rc.allow_order_zero) {
        throw ConfigError("mw with --order 0 requires --allow-order-zero");
    }
    WindowPlan plan;
    plan.order = rc.order;
    if (rc.windows != "auto") {
        plan.windows = sizes(rc.windows, "--windows");
    }
    plan.tau = rc.tau;
    plan.m_max = rc.m_max.value_or(plan.m_max);
    plan.penalty = parse_penalty(rc.penalty, plan.penalty, rc.rescale);
    plan.beta = parse_beta(rc.beta);
    plan.estimator = parse_estimator(rc.estimator);
    plan.engine = parse_engine(rc.engine);
    plan.restarts = rc.restarts;
    if (plan.engine == Engine::okm && plan.restarts > 0) {
        plan.seed = require_seed(rc, "okm with restarts");
    }
    if (!plan.windows.empty()) {
        plan.validate();
    }
    const TimeSeries series = load_input(rc);
    const auto y = univariate(series, "mw");
    if (plan.windows.empty()) {
        plan.windows = default_windows(y.size(), rc.order);
    }
    const MwResult res = mw_detect(y, plan);

    if (rc.format == "csv") {
        std::string out;
        if (rc.emit_scores) {
            out = "round,window,index,score\n";
            for (std::size_t r = 0; r < res.board.rounds.size(); ++r) {
                const auto& round = res.board.rounds[r];
                for (std::size_t i = 0; i < round.scores.size(); ++i) {
                    out += std::to_string(r + 1) + "," + std::to_string(round.window) + "," + std::to_string(i + 1) +
                           "," + std::to_string(round.scores[i]) + "\n";
                }
            }
        } else {
            out = "first,last\n";
            for (const auto& r : res.peaks.ranges) {
                out += std::to_string(r.first) + "," + std::to_string(r.last) + "\n";
            }
        }
        return out;
    }

    json rounds = json::array();
    for (const auto& round : res.board.rounds) {
        json jr{{"window", round.window}, {"skipped", round.skipped}, {"detected", round.detected}};
        if (rc.emit_scores) {
            jr["scores"] = round.scores;
        }
        rounds.push_back(std::move(jr));
    }
    json params{{"input", rc.input},
                {"n", y.size()},
                {"order", plan.order},
                {"windows", plan.windows},
                {"tau", plan.tau},
                {"m_max", plan.m_max},
                {"penalty", penalty_text(plan.penalty)},
                {"rescale_var", plan.penalty.rescale_by_variance},
                {"beta", plan.beta ? json(*plan.beta) : json("auto")},
                {"estimator", rc.estimator},
                {"engine", rc.engine},
                {"restarts", plan.restarts}};
    json result{{"m_hat", res.peaks.ranges.size()},
                {"ranges", ranges_json(res.peaks.ranges)},
                {"threshold", res.peaks.threshold},
                {"round", res.peaks.round},
                {"truncated", res.peaks.truncated},
                {"max_score", res.board.max_score()},
                {"rounds", std::move(rounds)}};
    return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
}

std::string cmd_bs(const RunConfig& rc) {
    BsOptions options;
    options.order = rc.order;
    options.m_max = rc.m_max.value_or(options.m_max);
    options.min_len = rc.min_len;
    options.penalty = parse_penalty(rc.penalty, options.penalty, rc.rescale);
    if (options.m_max < 1) {
        throw ConfigError("--mmax must be at least 1");
    }
    const TimeSeries series = load_input(rc);
    const auto y = univariate(series, "bs");
    const BsResult res = binary_segmentation(y, options);

    if (rc.format == "csv") {
        std::string out = "change_point\n";
        for (const auto cp : res.change_points) {
            out += std::to_string(cp) + "\n";
        }
        return out;
    }
    json params{{"input", rc.input},
                {"n", y.size()},
                {"order", options.order},
                {"m_max", options.m_max},
                {"min_len", options.min_len == 0 ? default_bs_min_len(options.order) : options.min_len},
                {"penalty", penalty_text(options.penalty)},
                {"rescale_var", options.penalty.rescale_by_variance}};
    json result{{"m_hat", res.change_points.size()},
                {"change_points", res.change_points},
                {"reductions", res.reductions},
                {"penalty", res.penalty},
                {"variance_scale", res.variance_scale}};
    return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
}

std::string cmd_pacf(const RunConfig& rc) {
    if (rc.max_lag < 1) {
        throw ConfigError("--max-lag must be at least 1");
    }
    const TimeSeries series = load_input(rc);
    const auto y = univariate(series, "pacf");
    const PacfResult res = pacf(y, rc.max_lag);
    if (rc.format == "json") {
        json params{{"input", rc.input}, {"n", y.size()}, {"max_lag", rc.max_lag}};
        std::vector<std::size_t> lags(res.values.size());
        std::iota(lags.begin(), lags.end(), std::size_t{1});
        json result{{"lags", lags}, {"pacf", res.values}, {"degenerate", res.degenerate}};
        return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
    }
    std::string out = "lag,pacf\n";
    for (std::size_t k = 0; k < res.values.size(); ++k) {
        out += std::to_string(k + 1) + "," + fmt(res.values[k]) + "\n";
    }
    return out;
}

// Generator and detector settings shared by simulate / experiment / benchmark.
ExperimentConfig experiment_config(const RunConfig& rc, Method method, bool default_ar) {
    ExperimentConfig config;
    config.method = method;
    const std::string gen = rc.generator.empty() ? (default_ar ? "ar" : "iid") : rc.generator;
    if (gen == "iid") {
        config.generator = Generator::iid_gaussian_means;
    } else if (gen == "ar") {
        config.generator = Generator::segmentwise_ar;
    } else {
        throw ConfigError("unknown generator '" + gen + "'");
    }
    if (rc.fractions == "none") {
        config.fractions.clear();
    } else if (!rc.fractions.empty()) {
        config.fractions = doubles(rc.fractions, "--fractions");
    }
    if (!rc.means.empty()) {
        config.means = double_rows(rc.means, "--means");
    } else if (config.fractions.size() + 1 != config.means.size()) {
        config.means.assign(config.fractions.size() + 1, {0.0});
        for (std::size_t s = 0; s < config.means.size(); ++s) {
            config.means[s][0] = static_cast<double>(s);
        }
    }
    if (!rc.filters.empty() && rc.filters != "random") {
        for (auto lags : double_rows(rc.filters, "--filters")) {
            lags.insert(lags.begin(), 0.0);
            config.filters.push_back(std::move(lags));
        }
    }
    config.random_filter_order = rc.random_order;
    config.noise_sd = rc.noise_sd;
    config.burn_in = rc.burn_in;

    config.order = rc.order;
    if (rc.m_max) {
        config.m_max = *rc.m_max;
    } else if (method == Method::mw) {
        config.m_max = WindowPlan{}.m_max;
    } else if (method == Method::bs) {
        config.m_max = BsOptions{}.m_max;
    }
    config.penalty = parse_penalty(rc.penalty, config.penalty, rc.rescale);
    config.beta = parse_beta(rc.beta);
    config.engine = parse_engine(rc.engine);
    config.restarts = rc.restarts;
    if (rc.windows != "auto") {
        config.windows = sizes(rc.windows, "--windows");
    }
    config.tau = rc.tau;
    config.estimator = parse_estimator(rc.estimator);
    config.bs_min_len = rc.min_len;
    config.hit_tolerance = rc.hit_tolerance;
    config.timing = rc.timing;
    return config;
}

std::string cmd_simulate(const RunConfig& rc) {
    ExperimentConfig config = experiment_config(rc, Method::quad, true);
    config.seed = require_seed(rc, "simulate");
    if (rc.n < 2) {
        throw ConfigError("--length must be at least 2");
    }
    config.validate();
    Rng rng = make_rng(config.seed);
    const GeneratedSeries data = generate(config, rc.n, rng);
    const TimeSeries& s = data.series;

    if (rc.format == "json") {
        json rows = json::array();
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto row = s.row(i);
            rows.push_back(s.dims() == 1 ? json(row[0]) : json(std::vector<double>(row.begin(), row.end())));
        }
        json params = to_json(config);
        params["n"] = rc.n;
        json result{{"n", s.size()},
                    {"dims", s.dims()},
                    {"change_points", data.change_points},
                    {"filters", data.filters},
                    {"series", std::move(rows)}};
        return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
    }
    std::string out;
    for (std::size_t d = 0; d < s.dims(); ++d) {
        out += (d ? ",x" : "x") + std::to_string(d + 1);
    }
    out += "\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t d = 0; d < s.dims(); ++d) {
            if (d) {
                out += ",";
            }
            out += fmt(s(i, d));
        }
        out += "\n";
    }
    return out;
}

std::string cmd_experiment(const RunConfig& rc) {
    const Method method = parse_method(rc.method);
    ExperimentConfig config = experiment_config(rc, method, method != Method::quad);
    config.seed = require_seed(rc, "experiment");
    if (!rc.ns.empty()) {
        config.ns = rc.ns;
    }
    config.reps = rc.reps.value_or(config.reps);
    config.validate();
    const ExperimentReport report = run_experiment(config);

    if (rc.format == "csv") {
        std::string out = "n,f_under,f_exact,f_over,mean_count,sd_count,hit_rate,all_covered_rate,median_ms\n";
        for (const auto& s : report.per_n) {
            out += std::to_string(s.n) + "," + fmt(s.f_under) + "," + fmt(s.f_exact) + "," + fmt(s.f_over) + "," +
                   fmt(s.mean_count) + "," + fmt(s.sd_count) + "," + fmt(s.hit_rate) + "," +
                   fmt(s.all_covered_rate) + "," + (s.median_ms ? fmt(*s.median_ms) : std::string()) + "\n";
        }
        return out;
    }
    json result = to_json(report);
    json params = result["config_echo"];
    return envelope(rc, std::move(params), std::move(result)).dump(2) + "\n";
}

std::string cmd_benchmark(const RunConfig& rc) {
    BenchmarkConfig bench;
    bench.base = experiment_config(rc, Method::mw, true);
    bench.base.seed = require_seed(rc, "benchmark");
    bench.methods.clear();
    for (const auto& m : split(rc.methods, ',')) {
        bench.methods.push_back(parse_method(m));
    }
    if (!rc.ns.empty()) {
        bench.ns = rc.ns;
    }
    bench.base.ns = bench.ns;
    bench.reps = rc.reps.value_or(bench.reps);
    bench.warmup = !rc.no_warmup;
    if (bench.reps < 1) {
        throw ConfigError("--reps must be at least 1");
    }
    bench.base.validate();
    const TimingTable table = benchmark_runtime(bench);

    if (rc.format == "csv") {
        std::string out = "method,n,median_ms\n";
        for (const auto& row : table.rows) {
            out += to_string(row.method) + "," + std::to_string(row.n) + "," + fmt(row.median_ms) + "\n";
        }
        return out;
    }
    json params = to_json(bench.base);
    params["reps"] = bench.reps;
    params["warmup"] = bench.warmup;
    json methods = json::array();
    for (const auto m : bench.methods) {
        methods.push_back(to_string(m));
    }
    params["methods"] = std::move(methods);
    return envelope(rc, std::move(params), to_json(table)).dump(2) + "\n";
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        out.flush();
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw DataError("cannot write '" + tmp.string() + "'");
        }
        f << content;
        f.close();
        if (!f) {
            fs::remove(tmp);
            throw DataError("cannot write '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cannot move output into '" + path + "': " + ec.message());
    }
}

std::string one_line(std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    while (!msg.empty() && msg.back() == ' ') {
        msg.pop_back();
    }
    return msg;
}

void add_input(CLI::App* sub, RunConfig& rc) {
    sub->add_option("--input,-i", rc.input, "CSV file")->required();
    sub->add_option("--columns", rc.columns, "Column names or 0-based indices")->delimiter(',');
    sub->add_flag_callback("--header", [&rc] { rc.header = true; }, "First row is a header");
    sub->add_flag_callback("--no-header", [&rc] { rc.header = false; }, "First row is data");
}

void add_penalty(CLI::App* sub, RunConfig& rc) {
    sub->add_option("--penalty", rc.penalty, "{aic|hq|bic|custom}:<j>, custom takes custom:<j>:<power>");
    sub->add_flag("--rescale-var,!--no-rescale-var", rc.rescale, "Scale the penalty by the data variance");
    sub->add_option("--mmax", rc.m_max, "Maximum number of change points");
}

void add_segmenter(CLI::App* sub, RunConfig& rc) {
    sub->add_option("--beta", rc.beta, "Minimum segment length or 'auto'");
    sub->add_option("--engine", rc.engine, "dp or okm")->check(CLI::IsMember({"dp", "okm"}));
    sub->add_option("--restarts", rc.restarts, "Random restarts for okm");
    sub->add_option("--seed", rc.seed, "Random seed");
}

void add_windows(CLI::App* sub, RunConfig& rc) {
    sub->add_option("--order,-L", rc.order, "AR order");
    sub->add_option("--windows", rc.windows, "'auto' or a decreasing list such as 100,50,20,10");
    sub->add_option("--tau", rc.tau, "Score tolerance");
    sub->add_option("--estimator", rc.estimator, "ls or yw")->check(CLI::IsMember({"ls", "yw"}));
}

void add_generator(CLI::App* sub, RunConfig& rc) {
    sub->add_option("--generator", rc.generator, "iid or ar")->check(CLI::IsMember({"iid", "ar"}));
    sub->add_option("--fractions", rc.fractions, "Relative change-point positions, e.g. 0.2,0.8, or 'none'");
    sub->add_option("--means", rc.means, "Segment means, rows separated by ';'");
    sub->add_option("--filters", rc.filters, "Segment AR lag coefficients, rows separated by ';', or 'random'");
    sub->add_option("--random-order", rc.random_order, "Order of randomly drawn filters");
    sub->add_option("--noise-sd", rc.noise_sd, "Innovation standard deviation");
    sub->add_option("--burn-in", rc.burn_in, "Discarded warm-up length");
}

void add_format(CLI::App* sub, RunConfig& rc, const std::string& fallback) {
    rc.format = fallback;
    sub->add_option("--output,-o", rc.output, "Output file (written atomically)");
    sub->add_option("--format", rc.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Change-point detection for piecewise stationary series", "segwise"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    // Each subcommand gets its own RunConfig copy so defaults such as --format differ.
    std::vector<std::pair<CLI::App*, std::unique_ptr<RunConfig>>> subs;
    auto make = [&](const std::string& name, const std::string& help) {
        auto cfg = std::make_unique<RunConfig>();
        CLI::App* sub = app.add_subcommand(name, help);
        subs.emplace_back(sub, std::move(cfg));
        return std::pair<CLI::App*, RunConfig*>{sub, subs.back().second.get()};
    };

    {
        auto [sub, c] = make("detect", "Penalized quadratic-loss detection of mean changes");
        add_input(sub, *c);
        add_penalty(sub, *c);
        add_segmenter(sub, *c);
        sub->add_flag("--constrained", c->constrained, "Enforce beta inside the minimization");
        add_format(sub, *c, "json");
    }
    {
        auto [sub, c] = make("mw", "Multi-window detection of AR filter changes");
        add_input(sub, *c);
        add_windows(sub, *c);
        sub->add_flag("--allow-order-zero", c->allow_order_zero, "Permit --order 0");
        add_penalty(sub, *c);
        add_segmenter(sub, *c);
        sub->add_flag("--emit-scores", c->emit_scores, "Include per-round score traces");
        add_format(sub, *c, "json");
    }
    {
        auto [sub, c] = make("bs", "Binary segmentation with the AR prediction loss");
        add_input(sub, *c);
        sub->add_option("--order,-L", c->order, "AR order");
        sub->add_option("--min-len", c->min_len, "Minimum segment length (0 = max(10L, 3))");
        add_penalty(sub, *c);
        add_format(sub, *c, "json");
    }
    {
        auto [sub, c] = make("pacf", "Sample partial autocorrelations");
        add_input(sub, *c);
        sub->add_option("--max-lag", c->max_lag, "Largest lag");
        add_format(sub, *c, "csv");
    }
    {
        auto [sub, c] = make("simulate", "Generate a synthetic series");
        add_generator(sub, *c);
        sub->add_option("--length,-n", c->n, "Series length")->required();
        sub->add_option("--seed", c->seed, "Random seed");
        add_format(sub, *c, "csv");
    }
    {
        auto [sub, c] = make("experiment", "Monte Carlo detection experiment");
        add_generator(sub, *c);
        sub->add_option("--method", c->method, "quad, mw or bs")->check(CLI::IsMember({"quad", "mw", "bs"}));
        sub->add_option("--ns", c->ns, "Series lengths")->delimiter(',');
        sub->add_option("--reps", c->reps, "Replications per length");
        add_windows(sub, *c);
        add_penalty(sub, *c);
        add_segmenter(sub, *c);
        sub->add_option("--min-len", c->min_len, "Minimum segment length for bs");
        sub->add_option("--hit-tolerance", c->hit_tolerance, "Distance counted as a hit for point estimates");
        sub->add_flag("--timing", c->timing, "Record per-rep wall-clock times (runs serially)");
        add_format(sub, *c, "json");
    }
    {
        auto [sub, c] = make("benchmark", "Runtime scaling of mw and bs");
        add_generator(sub, *c);
        sub->add_option("--methods", c->methods, "Comma-separated methods");
        sub->add_option("--ns", c->ns, "Series lengths")->delimiter(',');
        sub->add_option("--reps", c->reps, "Timed repetitions per length");
        sub->add_flag("--no-warmup", c->no_warmup, "Skip the untimed warm-up run");
        add_windows(sub, *c);
        add_penalty(sub, *c);
        add_segmenter(sub, *c);
        sub->add_option("--min-len", c->min_len, "Minimum segment length for bs");
        add_format(sub, *c, "json");
    }

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "segwise: config error: " << one_line(e.what()) << "\n";
        return config_error;
    }

    try {
        for (auto& [sub, c] : subs) {
            if (!sub->parsed()) {
                continue;
            }
            const std::string name = sub->get_name();
            std::string artifact;
            if (name == "detect") {
                artifact = cmd_detect(*c);
            } else if (name == "mw") {
                artifact = cmd_mw(*c);
            } else if (name == "bs") {
                artifact = cmd_bs(*c);
            } else if (name == "pacf") {
                artifact = cmd_pacf(*c);
            } else if (name == "simulate") {
                artifact = cmd_simulate(*c);
            } else if (name == "experiment") {
                artifact = cmd_experiment(*c);
            } else {
                artifact = cmd_benchmark(*c);
            }
            write_output(c->output, artifact, out);
            return ok;
        }
    } catch (const DataError& e) {
        err << "segwise: data error: " << one_line(e.what()) << "\n";
        return data_error;
    } catch (const std::exception& e) {
        err << "segwise: config error: " << one_line(e.what()) << "\n";
        return config_error;
    }
    return ok;
}

} // namespace segwise::cli
