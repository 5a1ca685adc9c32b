#pragma once

// Binary segmentation with the autoregressive prediction-error loss.

#include "segwise/segmenter.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace segwise {

/// Sum of squared one-step residuals of the least-squares AR(L) fit on the
/// slice. +infinity when the slice has at most 2L + 2 points.
double ar_loss(std::span<const double> y, std::size_t order);

/// The same quantity from normal equations accumulated over the slice. Used by
/// the segmentation scan; falls back to ar_loss on a singular design.
double ar_loss_direct(std::span<const double> y, std::size_t order);

struct BsOptions {
    std::size_t order = 2;
    std::size_t m_max = 4;
    std::size_t min_len = 0; // 0 selects max(10 L, 3)
    PenaltySpec penalty{};
};

std::size_t default_bs_min_len(std::size_t order);

struct BsResult {
    std::vector<std::size_t> change_points; // sorted
    std::vector<double> reductions;          // loss reduction of each accepted split, in acceptance order
    double penalty = 0.0;                    // scaled per-split threshold
    double variance_scale = 1.0;             // residual variance of the whole-series AR fit
};

/// Repeatedly splits the segment whose best single split reduces the summed AR
/// loss the most, while that reduction exceeds the penalty and fewer than m_max
/// points have been accepted. Every candidate split refits both sides.
BsResult binary_segmentation(std::span<const double> y, const BsOptions& options);

} // namespace segwise
