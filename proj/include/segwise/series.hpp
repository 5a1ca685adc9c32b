#pragma once

// Time-series container, prefix statistics and the quadratic-loss kernel.
//
// Boundaries are expressed as prefix counts: the segment (a, b] holds the
// 1-based observations a+1..b, i.e. rows [a, b) of the array. A change point
// value l is therefore both "the number of points before the change" and the
// 1-based index of the last point of the left segment.

#include <cstddef>
#include <span>
#include <vector>

namespace segwise {

/// N x D array of finite reals stored row-major. Row n is observation x_{n+1}.
class TimeSeries {
public:
    TimeSeries() = default;

    /// Univariate series. Throws DataError naming the first non-finite index.
    explicit TimeSeries(std::vector<double> values);

    /// Row-major N x D data. Throws DataError on shape mismatch or non-finite value.
    TimeSeries(std::vector<double> values, std::size_t dims);

    static TimeSeries from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t size() const noexcept { return n_; }
    std::size_t dims() const noexcept { return d_; }
    bool empty() const noexcept { return n_ == 0; }

    double operator()(std::size_t n, std::size_t d) const { return values_[n * d_ + d]; }
    std::span<const double> row(std::size_t n) const { return {values_.data() + n * d_, d_}; }
    std::span<const double> data() const noexcept { return values_; }

    /// Column d copied into a contiguous vector.
    std::vector<double> column(std::size_t d) const;

    /// Rows [begin, end) as a new series.
    TimeSeries slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    void validate() const;

    std::vector<double> values_;
    std::size_t n_ = 0;
    std::size_t d_ = 1;
};

/// Prefix sums enabling O(D) segment-loss queries.
class SeriesStats {
public:
    explicit SeriesStats(const TimeSeries& series);

    std::size_t size() const noexcept { return n_; }
    std::size_t dims() const noexcept { return d_; }

    /// cumsum[n] = sum of the first n rows, one D-vector per n = 0..N.
    std::span<const double> cumsum(std::size_t n) const { return {cumsum_.data() + n * d_, d_}; }
    /// cumsq[n] = sum of squared norms of the first n rows.
    double cumsq(std::size_t n) const { return cumsq_[n]; }

    /// Sample mean of segment (a, b] in dimension d.
    double mean(std::size_t a, std::size_t b, std::size_t d) const;

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<double> cumsum_;
    std::vector<double> cumsq_;
};

inline SeriesStats build_stats(const TimeSeries& series) { return SeriesStats(series); }

/// Ordered interior change points of a series of length n.
class Segmentation {
public:
    Segmentation(std::size_t n, std::vector<std::size_t> change_points);

    std::size_t n() const noexcept { return n_; }
    const std::vector<std::size_t>& change_points() const noexcept { return points_; }
    std::size_t count() const noexcept { return points_.size(); }

    /// Boundaries 0, l_1, ..., l_k, n.
    std::vector<std::size_t> boundaries() const;
    std::size_t min_segment_length() const;

private:
    std::size_t n_;
    std::vector<std::size_t> points_;
};

/// Sum of squared deviations from the sample mean over (a, b]. O(D).
double quad_loss(const SeriesStats& stats, std::size_t a, std::size_t b);

/// Reduction in quadratic loss obtained by splitting (a, b] at m:
/// n1 * n2 / n * |mean(a, m) - mean(m, b)|^2.
double decomposition_gain(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b);

/// Boundary-move test for segments (a, m] and (m, b]: whether moving the last
/// t points of the left segment into the right one strictly lowers the loss.
bool shift_improves(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b, std::size_t t);

/// Mirror of shift_improves: moves the first t points of (m, b] into (a, m].
bool shift_right_improves(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b,
                          std::size_t t);

double total_loss(const SeriesStats& stats, const Segmentation& seg);
double total_loss(const SeriesStats& stats, std::span<const std::size_t> change_points);

/// Per-dimension sample variances (n - 1 denominator) averaged over dimensions.
double mean_variance(const TimeSeries& series);

} // namespace segwise
