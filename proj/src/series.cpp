#include "segwise/series.hpp"

#include "segwise/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace segwise {

TimeSeries::TimeSeries(std::vector<double> values)
    : values_(std::move(values)), n_(values_.size()), d_(1) {
    validate();
}

TimeSeries::TimeSeries(std::vector<double> values, std::size_t dims) : values_(std::move(values)), d_(dims) {
    if (dims == 0) {
        throw DataError("series dimension must be at least 1");
    }
    if (values_.size() % dims != 0) {
        throw DataError("series of " + std::to_string(values_.size()) + " values is not divisible into rows of "
                        + std::to_string(dims));
    }
    n_ = values_.size() / dims;
    validate();
}

TimeSeries TimeSeries::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return TimeSeries(std::vector<double>{}, 1);
    }
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (rows[n].size() != d) {
            throw DataError("row " + std::to_string(n) + " has " + std::to_string(rows[n].size())
                            + " values, expected " + std::to_string(d));
        }
        flat.insert(flat.end(), rows[n].begin(), rows[n].end());
    }
    return TimeSeries(std::move(flat), d);
}

void TimeSeries::validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DataError("non-finite value at row " + std::to_string(i / d_) + ", column "
                            + std::to_string(i % d_));
        }
    }
}

std::vector<double> TimeSeries::column(std::size_t d) const {
    std::vector<double> out(n_);
    for (std::size_t n = 0; n < n_; ++n) {
        out[n] = (*this)(n, d);
    }
    return out;
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_) {
        throw RangeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside series of length "
                         + std::to_string(n_));
    }
    return TimeSeries(std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * d_),
                                          values_.begin() + static_cast<std::ptrdiff_t>(end * d_)),
                      d_);
}

SeriesStats::SeriesStats(const TimeSeries& series)
    : n_(series.size()), d_(series.dims()), cumsum_((n_ + 1) * d_, 0.0), cumsq_(n_ + 1, 0.0) {
    for (std::size_t n = 0; n < n_; ++n) {
        double sq = 0.0;
        for (std::size_t d = 0; d < d_; ++d) {
            const double x = series(n, d);
            cumsum_[(n + 1) * d_ + d] = cumsum_[n * d_ + d] + x;
            sq += x * x;
        }
        cumsq_[n + 1] = cumsq_[n] + sq;
    }
}

double SeriesStats::mean(std::size_t a, std::size_t b, std::size_t d) const {
    return (cumsum_[b * d_ + d] - cumsum_[a * d_ + d]) / static_cast<double>(b - a);
}

Segmentation::Segmentation(std::size_t n, std::vector<std::size_t> change_points)
    : n_(n), points_(std::move(change_points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (points_[i] == 0 || points_[i] >= n_) {
            throw RangeError("change point " + std::to_string(points_[i]) + " outside (0, " + std::to_string(n_) + ")");
        }
        if (i > 0 && points_[i] <= points_[i - 1]) {
            throw RangeError("change points must be strictly increasing");
        }
    }
}

std::vector<std::size_t> Segmentation::boundaries() const {
    std::vector<std::size_t> out;
    out.reserve(points_.size() + 2);
    out.push_back(0);
    out.insert(out.end(), points_.begin(), points_.end());
    out.push_back(n_);
    return out;
}

std::size_t Segmentation::min_segment_length() const {
    const auto b = boundaries();
    std::size_t best = n_;
    for (std::size_t j = 1; j < b.size(); ++j) {
        best = std::min(best, b[j] - b[j - 1]);
    }
    return best;
}

namespace {

void check_range(const SeriesStats& stats, std::size_t a, std::size_t b) {
    if (a >= b || b > stats.size()) {
        throw RangeError("invalid segment (" + std::to_string(a) + ", " + std::to_string(b) + "] for series of length "
                         + std::to_string(stats.size()));
    }
}

void check_split(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b) {
    check_range(stats, a, b);
    if (m <= a || m >= b) {
        throw RangeError("split " + std::to_string(m) + " not interior to (" + std::to_string(a) + ", "
                         + std::to_string(b) + "]");
    }
}

// Squared distance between the means of (a1, b1] and (a2, b2].
double mean_distance_sq(const SeriesStats& stats, std::size_t a1, std::size_t b1, std::size_t a2, std::size_t b2) {
    double acc = 0.0;
    for (std::size_t d = 0; d < stats.dims(); ++d) {
        const double diff = stats.mean(a1, b1, d) - stats.mean(a2, b2, d);
        acc += diff * diff;
    }
    return acc;
}

} // namespace

double quad_loss(const SeriesStats& stats, std::size_t a, std::size_t b) {
    check_range(stats, a, b);
    const std::size_t len = b - a;
    if (len == 1) {
        return 0.0;
    }
    const auto hi = stats.cumsum(b);
    const auto lo = stats.cumsum(a);
    double sum_sq = 0.0;
    for (std::size_t d = 0; d < stats.dims(); ++d) {
        const double s = hi[d] - lo[d];
        sum_sq += s * s;
    }
    const double loss = (stats.cumsq(b) - stats.cumsq(a)) - sum_sq / static_cast<double>(len);
    // Cancellation residue only; a larger negative value is returned as is.
    if (loss < 0.0 && -loss < 1e-9 * stats.cumsq(b)) {
        return 0.0;
    }
    return loss;
}

double decomposition_gain(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b) {
    check_split(stats, a, m, b);
    const double n1 = static_cast<double>(m - a);
    const double n2 = static_cast<double>(b - m);
    return n1 * n2 / (n1 + n2) * mean_distance_sq(stats, a, m, m, b);
}

bool shift_improves(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b, std::size_t t) {
    check_split(stats, a, m, b);
    if (t == 0 || t >= m - a) {
        throw RangeError("invalid shift " + std::to_string(t) + " for left segment of length " + std::to_string(m - a));
    }
    const double n1 = static_cast<double>(m - a);
    const double n2 = static_cast<double>(b - m);
    const double td = static_cast<double>(t);
    const double lhs = n1 * mean_distance_sq(stats, a, m, m - t, m) / (n1 - td);
    const double rhs = n2 * mean_distance_sq(stats, m, b, m - t, m) / (n2 + td);
    return lhs > rhs;
}

bool shift_right_improves(const SeriesStats& stats, std::size_t a, std::size_t m, std::size_t b, std::size_t t) {
    check_split(stats, a, m, b);
    if (t == 0 || t >= b - m) {
        throw RangeError("invalid shift " + std::to_string(t) + " for right segment of length " + std::to_string(b - m));
    }
    const double n1 = static_cast<double>(m - a);
    const double n2 = static_cast<double>(b - m);
    const double td = static_cast<double>(t);
    const double lhs = n2 * mean_distance_sq(stats, m, b, m, m + t) / (n2 - td);
    const double rhs = n1 * mean_distance_sq(stats, a, m, m, m + t) / (n1 + td);
    return lhs > rhs;
}

double total_loss(const SeriesStats& stats, const Segmentation& seg) {
    if (seg.n() != stats.size()) {
        throw RangeError("segmentation length " + std::to_string(seg.n()) + " does not match series length "
                         + std::to_string(stats.size()));
    }
    return total_loss(stats, seg.change_points());
}

double total_loss(const SeriesStats& stats, std::span<const std::size_t> change_points) {
    double acc = 0.0;
    std::size_t prev = 0;
    for (const std::size_t cp : change_points) {
        if (cp <= prev || cp >= stats.size()) {
            throw RangeError("invalid segmentation: change point " + std::to_string(cp));
        }
        acc += quad_loss(stats, prev, cp);
        prev = cp;
    }
    return acc + quad_loss(stats, prev, stats.size());
}

double mean_variance(const TimeSeries& series) {
    const std::size_t n = series.size();
    if (n < 2) {
        return 0.0;
    }
    double acc = 0.0;
    for (std::size_t d = 0; d < series.dims(); ++d) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += series(i, d);
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = series(i, d) - mean;
            ss += dev * dev;
        }
        acc += ss / static_cast<double>(n - 1);
    }
    return acc / static_cast<double>(series.dims());
}

} // namespace segwise
