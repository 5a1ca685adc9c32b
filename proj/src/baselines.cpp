#include "segwise/baselines.hpp"

#include "segwise/ar.hpp"
#include "segwise/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace segwise {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// In-place Cholesky solve of the k x k system g * x = h (upper triangle of g
// used). Returns false when g is not numerically positive definite.
template <std::size_t K>
bool cholesky_solve(std::array<std::array<double, K>, K>& g, std::array<double, K>& h, std::size_t k) {
    const double scale = g[0][0];
    for (std::size_t j = 0; j < k; ++j) {
        double diag = g[j][j];
        for (std::size_t p = 0; p < j; ++p) {
            diag -= g[p][j] * g[p][j];
        }
        if (!(diag > 1e-12 * scale)) {
            return false;
        }
        const double root = std::sqrt(diag);
        g[j][j] = root;
        for (std::size_t i = j + 1; i < k; ++i) {
            double v = g[j][i];
            for (std::size_t p = 0; p < j; ++p) {
                v -= g[p][j] * g[p][i];
            }
            g[j][i] = v / root;
        }
    }
    // Forward then backward substitution with R^T R = G.
    for (std::size_t i = 0; i < k; ++i) {
        double v = h[i];
        for (std::size_t p = 0; p < i; ++p) {
            v -= g[p][i] * h[p];
        }
        h[i] = v / g[i][i];
    }
    for (std::size_t i = k; i-- > 0;) {
        double v = h[i];
        for (std::size_t p = i + 1; p < k; ++p) {
            v -= g[i][p] * h[p];
        }
        h[i] = v / g[i][i];
    }
    return true;
}

template <std::size_t L>
double direct_rss(std::span<const double> y, std::size_t order) {
    constexpr std::size_t K = L + 1;
    std::array<std::array<double, K>, K> g{};
    std::array<double, K> h{};
    double yy = 0.0;
    std::array<double, K> z{};
    z[0] = 1.0;
    for (std::size_t n = order; n < y.size(); ++n) {
#pragma GCC unroll 8
        for (std::size_t i = 1; i < K; ++i) {
            z[i] = y[n - i];
        }
        const double target = y[n];
#pragma GCC unroll 8
        for (std::size_t i = 0; i < K; ++i) {
#pragma GCC unroll 8
            for (std::size_t j = i; j < K; ++j) {
                g[i][j] += z[i] * z[j];
            }
            h[i] += z[i] * target;
        }
        yy += target * target;
    }
    auto psi = h;
    if (!cholesky_solve<K>(g, psi, K)) {
        return ar_loss(y, order);
    }
    double explained = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        explained += psi[i] * h[i];
    }
    return std::max(0.0, yy - explained);
}

} // namespace

double ar_loss(std::span<const double> y, std::size_t order) {
    if (y.size() <= 2 * order + 2) {
        return inf;
    }
    const auto filter = fit_ls(y, order);
    double rss = 0.0;
    for (std::size_t n = order; n < y.size(); ++n) {
        double pred = filter.coeffs[0];
        for (std::size_t i = 1; i <= order; ++i) {
            pred += filter.coeffs[i] * y[n - i];
        }
        const double e = y[n] - pred;
        rss += e * e;
    }
    return rss;
}

double ar_loss_direct(std::span<const double> y, std::size_t order) {
    if (y.size() <= 2 * order + 2) {
        return inf;
    }
    switch (order) {
    case 0:
        return direct_rss<0>(y, order);
    case 1:
        return direct_rss<1>(y, order);
    case 2:
        return direct_rss<2>(y, order);
    case 3:
        return direct_rss<3>(y, order);
    case 4:
        return direct_rss<4>(y, order);
    default:
        return ar_loss(y, order);
    }
}

std::size_t default_bs_min_len(std::size_t order) { return std::max<std::size_t>(10 * order, 3); }

namespace {

struct Candidate {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t split = 0;
    double reduction = -inf;
};

Candidate best_split(std::span<const double> y, std::size_t begin, std::size_t end, std::size_t order,
                     std::size_t min_len) {
    Candidate c{begin, end, 0, -inf};
    if (end - begin < 2 * min_len) {
        return c;
    }
    const double whole = ar_loss_direct(y.subspan(begin, end - begin), order);
    for (std::size_t m = begin + min_len; m + min_len <= end; ++m) {
        const double left = ar_loss_direct(y.subspan(begin, m - begin), order);
        const double right = ar_loss_direct(y.subspan(m, end - m), order);
        const double reduction = whole - left - right;
        if (reduction > c.reduction) {
            c.reduction = reduction;
            c.split = m;
        }
    }
    return c;
}

} // namespace

BsResult binary_segmentation(std::span<const double> y, const BsOptions& options) {
    options.penalty.validate();
    if (options.m_max < 1) {
        throw ConfigError("binary segmentation needs m_max >= 1");
    }
    if (y.empty()) {
        throw DataError("cannot segment an empty series");
    }
    const std::size_t min_len = options.min_len == 0 ? default_bs_min_len(options.order) : options.min_len;

    BsResult out;
    // The AR loss measures prediction residuals, so the scale is the residual
    // variance of one AR(L) fit to the whole series (the sample variance at L = 0).
    if (options.penalty.rescale_by_variance && y.size() > 2 * options.order) {
        out.variance_scale = fit_ls(y, options.order).resid_var;
    }
    out.penalty = penalty_value(options.penalty, y.size(), out.variance_scale);

    std::vector<Candidate> open{best_split(y, 0, y.size(), options.order, min_len)};
    while (out.change_points.size() < options.m_max && !open.empty()) {
        auto it = std::max_element(open.begin(), open.end(), [](const Candidate& a, const Candidate& b) {
            return a.reduction < b.reduction;
        });
        if (!(it->reduction > out.penalty)) {
            break;
        }
        const Candidate chosen = *it;
        open.erase(it);
        out.change_points.push_back(chosen.split);
        out.reductions.push_back(chosen.reduction);
        open.push_back(best_split(y, chosen.begin, chosen.split, options.order, min_len));
        open.push_back(best_split(y, chosen.split, chosen.end, options.order, min_len));
    }
    std::sort(out.change_points.begin(), out.change_points.end());
    return out;
}

} // namespace segwise
