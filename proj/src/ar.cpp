#include "segwise/ar.hpp"

#include "segwise/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

namespace segwise {

ARFilter fit_ls(std::span<const double> y, std::size_t order) {
    const std::size_t len = y.size();
    if (len <= 2 * order) {
        throw DataError("least-squares AR(" + std::to_string(order) + ") needs more than " + std::to_string(2 * order)
                        + " points, got " + std::to_string(len));
    }
    const std::size_t rows = len - order;
    const std::size_t cols = order + 1;

    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd target(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t n = r + order;
        design(r, 0) = 1.0;
        for (std::size_t i = 1; i <= order; ++i) {
            design(r, i) = y[n - i];
        }
        target(r) = y[n];
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd psi = cod.solve(target);
    const double rss = (target - design * psi).squaredNorm();

    ARFilter out;
    out.order = order;
    out.coeffs.assign(psi.data(), psi.data() + cols);
    out.rank_deficient = static_cast<std::size_t>(cod.rank()) < cols;
    const double dof = std::max(1.0, static_cast<double>(rows) - static_cast<double>(cols));
    out.resid_var = rss / dof;
    return out;
}

std::vector<double> autocovariance(std::span<const double> y, std::size_t max_lag) {
    const std::size_t n = y.size();
    if (n == 0) {
        throw DataError("autocovariance of an empty series");
    }
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> out(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag && k < n; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) {
            acc += (y[t] - mean) * (y[t + k] - mean);
        }
        out[k] = acc / static_cast<double>(n);
    }
    return out;
}

LevinsonResult levinson_durbin(std::span<const double> acov, std::size_t order) {
    if (acov.size() < order + 1) {
        throw ConfigError("Levinson-Durbin of order " + std::to_string(order) + " needs " + std::to_string(order + 1)
                          + " autocovariances");
    }
    if (!(acov[0] > 0.0)) {
        throw DataError("Levinson-Durbin requires a positive lag-0 autocovariance");
    }
    LevinsonResult out;
    out.coeffs.assign(order, 0.0);
    out.reflection.assign(order, 0.0);
    std::vector<double> prev(order, 0.0);
    double err = acov[0];
    for (std::size_t m = 1; m <= order; ++m) {
        double num = acov[m];
        for (std::size_t j = 1; j < m; ++j) {
            num -= prev[j - 1] * acov[m - j];
        }
        const double k = err > 0.0 ? num / err : 0.0;
        out.reflection[m - 1] = k;
        for (std::size_t j = 1; j < m; ++j) {
            out.coeffs[j - 1] = prev[j - 1] - k * prev[m - j - 1];
        }
        out.coeffs[m - 1] = k;
        err *= (1.0 - k * k);
        std::copy(out.coeffs.begin(), out.coeffs.begin() + static_cast<std::ptrdiff_t>(m), prev.begin());
    }
    out.error_var = std::max(0.0, err);
    return out;
}

ARFilter fit_yw(std::span<const double> y, std::size_t order) {
    const std::size_t len = y.size();
    if (len <= order + 1) {
        throw DataError("Yule-Walker AR(" + std::to_string(order) + ") needs more than " + std::to_string(order + 1)
                        + " points, got " + std::to_string(len));
    }
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(len);
    const auto acov = autocovariance(y, order);

    ARFilter out;
    out.order = order;
    out.coeffs.assign(order + 1, 0.0);
    if (!(acov[0] > 0.0)) {
        out.coeffs[0] = mean;
        out.degenerate = true;
        return out;
    }
    const auto ld = levinson_durbin(acov, order);
    const double lag_sum = std::accumulate(ld.coeffs.begin(), ld.coeffs.end(), 0.0);
    out.coeffs[0] = mean * (1.0 - lag_sum);
    std::copy(ld.coeffs.begin(), ld.coeffs.end(), out.coeffs.begin() + 1);
    out.resid_var = ld.error_var;
    return out;
}

ARFilter fit(std::span<const double> y, std::size_t order, Estimator estimator) {
    return estimator == Estimator::ls ? fit_ls(y, order) : fit_yw(y, order);
}

PacfResult pacf_from_autocov(std::span<const double> acov, std::size_t max_lag) {
    PacfResult out;
    if (!(acov.size() > 0 && acov[0] > 0.0)) {
        out.values.assign(max_lag, 0.0);
        out.degenerate = true;
        return out;
    }
    out.values = levinson_durbin(acov, max_lag).reflection;
    return out;
}

PacfResult pacf(std::span<const double> y, std::size_t max_lag) {
    if (y.size() <= max_lag + 1) {
        throw DataError("PACF up to lag " + std::to_string(max_lag) + " needs more than " + std::to_string(max_lag + 1)
                        + " points, got " + std::to_string(y.size()));
    }
    return pacf_from_autocov(autocovariance(y, max_lag), max_lag);
}

double spectral_radius(std::span<const double> lag_coeffs) {
    const auto order = static_cast<Eigen::Index>(lag_coeffs.size());
    if (order == 0) {
        return 0.0;
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
    for (Eigen::Index i = 0; i < order; ++i) {
        companion(0, i) = lag_coeffs[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index i = 1; i < order; ++i) {
        companion(i, i - 1) = 1.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stable(std::span<const double> lag_coeffs) { return spectral_radius(lag_coeffs) < 1.0; }

std::vector<double> reflection_to_coeffs(std::span<const double> reflection) {
    std::vector<double> coeffs;
    coeffs.reserve(reflection.size());
    for (const double k : reflection) {
        const std::size_t m = coeffs.size() + 1;
        std::vector<double> next(m);
        for (std::size_t j = 1; j < m; ++j) {
            next[j - 1] = coeffs[j - 1] - k * coeffs[m - j - 1];
        }
        next[m - 1] = k;
        coeffs = std::move(next);
    }
    return coeffs;
}

ARFilter sample_stable_filter(std::size_t order, Rng& rng) {
    if (order == 0) {
        throw ConfigError("stable filter sampling needs order >= 1");
    }
    ARFilter out;
    out.order = order;
    out.coeffs.assign(order + 1, 0.0);
    if (order == 2) {
        std::uniform_real_distribution<double> u1(-2.0, 2.0);
        std::uniform_real_distribution<double> u2(-1.0, 1.0);
        // The triangle fills half of the box, so this terminates quickly.
        for (;;) {
            const double p1 = u1(rng);
            const double p2 = u2(rng);
            if (p2 + p1 < 1.0 && p2 - p1 < 1.0 && std::abs(p2) < 1.0) {
                out.coeffs[1] = p1;
                out.coeffs[2] = p2;
                return out;
            }
        }
    }
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> reflection(order);
    for (auto& k : reflection) {
        k = unit(rng);
    }
    const auto lags = reflection_to_coeffs(reflection);
    std::copy(lags.begin(), lags.end(), out.coeffs.begin() + 1);
    return out;
}

std::size_t default_burn_in(std::size_t order) { return std::min<std::size_t>(100 * (order + 1), 1000); }

void extend_ar(std::vector<double>& history, std::span<const double> coeffs, double noise_sd, std::size_t n, Rng& rng) {
    const std::size_t order = coeffs.size() - 1;
    std::normal_distribution<double> noise(0.0, 1.0);
    history.reserve(history.size() + n);
    for (std::size_t s = 0; s < n; ++s) {
        double value = coeffs[0];
        const std::size_t t = history.size();
        for (std::size_t i = 1; i <= order; ++i) {
            value += coeffs[i] * (t >= i ? history[t - i] : 0.0);
        }
        value += noise_sd * noise(rng);
        history.push_back(value);
    }
}

TimeSeries simulate_ar(const ARFilter& filter, double noise_sd, std::size_t n, std::size_t burn_in, Rng& rng) {
    if (n == 0) {
        throw ConfigError("simulation length must be at least 1");
    }
    if (noise_sd < 0.0 || !std::isfinite(noise_sd)) {
        throw ConfigError("noise standard deviation must be finite and non-negative");
    }
    if (filter.order > 0 && !is_stable(filter.lags())) {
        std::cerr << "warning: simulating an unstable AR filter\n";
    }
    std::vector<double> history;
    extend_ar(history, filter.coeffs, noise_sd, burn_in, rng);
    extend_ar(history, filter.coeffs, noise_sd, n, rng);
    history.erase(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(burn_in));
    return TimeSeries(std::move(history));
}

TimeSeries FilterSequence::as_series() const {
    std::vector<double> flat;
    flat.reserve(filters.size() * (order + 1));
    for (const auto& f : filters) {
        flat.insert(flat.end(), f.coeffs.begin(), f.coeffs.end());
    }
    return TimeSeries(std::move(flat), order + 1);
}

FilterSequence window_features(std::span<const double> y, std::size_t window, std::size_t order, Estimator estimator) {
    if (window <= 2 * order) {
        throw ConfigError("window " + std::to_string(window) + " must exceed twice the AR order "
                          + std::to_string(order));
    }
    if (y.size() < window) {
        throw DataError("series of length " + std::to_string(y.size()) + " is shorter than window "
                        + std::to_string(window));
    }
    FilterSequence out;
    out.window = window;
    out.order = order;
    const std::size_t count = y.size() / window;
    out.filters.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto f = fit(y.subspan(i * window, window), order, estimator);
        if (f.rank_deficient || f.degenerate) {
            ++out.degenerate_count;
        }
        out.filters.push_back(std::move(f));
    }
    return out;
}

} // namespace segwise
