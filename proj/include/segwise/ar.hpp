#pragma once

// Autoregressive filters: estimation, partial autocorrelation, stable-filter
// sampling and simulation.
//
// A filter of order L holds coeffs = [intercept, psi_1, ..., psi_L] so that
//   y_n = coeffs[0] + sum_i coeffs[i] * y_{n-i} + e_n.

#include "segwise/random.hpp"
#include "segwise/series.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace segwise {

struct ARFilter {
    std::size_t order = 0;
    std::vector<double> coeffs{0.0};
    double resid_var = 0.0;
    bool rank_deficient = false; // least squares fell back to the minimum-norm solution
    bool degenerate = false;     // Yule-Walker on a zero-variance slice

    /// Lag coefficients psi_1..psi_L.
    std::span<const double> lags() const { return std::span<const double>(coeffs).subspan(1); }
};

enum class Estimator { ls, yw };

/// Least-squares fit over the rows n = L..len-1 of the slice; design row
/// [1, y_{n-1}, ..., y_{n-L}]. Requires len > 2L.
ARFilter fit_ls(std::span<const double> y, std::size_t order);

/// Yule-Walker fit via Levinson-Durbin on the demeaned slice. Requires len > L + 1.
ARFilter fit_yw(std::span<const double> y, std::size_t order);

ARFilter fit(std::span<const double> y, std::size_t order, Estimator estimator);

/// Biased sample autocovariances r_0..r_max_lag of the demeaned data.
std::vector<double> autocovariance(std::span<const double> y, std::size_t max_lag);

struct LevinsonResult {
    std::vector<double> coeffs;     // psi_1..psi_L
    std::vector<double> reflection; // k_1..k_L (the PACF)
    double error_var = 0.0;         // final prediction-error variance
};

/// Solves the Toeplitz Yule-Walker system for autocovariances r_0..r_order.
/// Requires r_0 > 0.
LevinsonResult levinson_durbin(std::span<const double> acov, std::size_t order);

struct PacfResult {
    std::vector<double> values; // entry k-1 is the lag-k partial autocorrelation
    bool degenerate = false;
};

PacfResult pacf(std::span<const double> y, std::size_t max_lag);
PacfResult pacf_from_autocov(std::span<const double> acov, std::size_t max_lag);

/// Lag coefficients whose characteristic roots all lie outside the unit circle
/// (companion matrix spectral radius < 1).
bool is_stable(std::span<const double> lag_coeffs);
double spectral_radius(std::span<const double> lag_coeffs);

/// Maps reflection coefficients in (-1, 1) to AR lag coefficients.
std::vector<double> reflection_to_coeffs(std::span<const double> reflection);

/// Draws a zero-intercept stable filter. For L = 2 the lag pair is uniform on the
/// stability triangle; for other L the reflection coefficients are uniform on
/// (-1, 1), which is stable but not uniform on the stable region.
ARFilter sample_stable_filter(std::size_t order, Rng& rng);

std::size_t default_burn_in(std::size_t order);

/// Simulates n samples after discarding burn_in, starting from zero lags.
TimeSeries simulate_ar(const ARFilter& filter, double noise_sd, std::size_t n, std::size_t burn_in, Rng& rng);

/// Continues an AR recursion: appends n samples to `history` using its last L
/// values as initial lags.
void extend_ar(std::vector<double>& history, std::span<const double> coeffs, double noise_sd, std::size_t n, Rng& rng);

struct FilterSequence {
    std::size_t window = 0;
    std::size_t order = 0;
    std::vector<ARFilter> filters;
    std::size_t degenerate_count = 0;

    /// Coefficient vectors as a floor(N/w) x (L+1) series.
    TimeSeries as_series() const;
};

/// Fits one filter per complete window ((i-1)w, iw]; the remainder is dropped.
FilterSequence window_features(std::span<const double> y, std::size_t window, std::size_t order, Estimator estimator);

} // namespace segwise
