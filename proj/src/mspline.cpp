#include "hazspline/mspline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hazspline/stats.hpp"

namespace hazspline {

void KnotSet::validate() const {
    if (order < 1) throw std::invalid_argument("spline order must be at least 1");
    if (!(upper > 0.0) || !std::isfinite(upper))
        throw std::invalid_argument("upper boundary knot must be positive and finite");
    double prev = 0.0;
    for (double k : internal) {
        if (!(k > prev)) throw std::invalid_argument("internal knots must be strictly increasing and positive");
        prev = k;
    }
    if (!internal.empty() && !(upper > internal.back()))
        throw std::invalid_argument("upper boundary knot must exceed every internal knot");
}

KnotPlacement build_knots(std::span<const double> event_times, int n_basis,
                          std::span<const double> extra_knots, std::optional<double> upper,
                          bool smooth_boundary, int order) {
    if (event_times.empty()) throw std::invalid_argument("knot placement needs at least one uncensored time");
    if (n_basis < 4) throw std::invalid_argument("n_basis must be at least 4");
    if (smooth_boundary && order != 4)
        throw std::invalid_argument("smooth boundary is only available for cubic (order 4) bases");

    std::vector<double> times(event_times.begin(), event_times.end());
    std::sort(times.begin(), times.end());
    if (!(times.front() > 0.0)) throw std::invalid_argument("event times must be positive");
    const double max_event = times.back();

    KnotPlacement out;
    out.knots.order = order;

    for (double e : extra_knots)
        if (!(e > 0.0)) throw std::invalid_argument("extra knots must be positive");

    double boundary = max_event;
    if (upper) {
        if (!(*upper > max_event)) {
            std::ostringstream msg;
            msg << "upper knot " << *upper << " must exceed the last event time " << max_event;
            throw std::invalid_argument(msg.str());
        }
        boundary = *upper;
        for (double e : extra_knots)
            if (e > boundary) throw std::invalid_argument("extra knots must not exceed the upper knot");
    } else if (!extra_knots.empty()) {
        boundary = std::max(boundary, *std::max_element(extra_knots.begin(), extra_knots.end()));
    }
    out.knots.upper = boundary;

    const int n_quantile = std::max(0, smooth_boundary ? n_basis - 2 : n_basis - order);
    std::vector<double> knots;
    for (int j = 1; j <= n_quantile; ++j)
        knots.push_back(quantile_sorted(times, static_cast<double>(j) / (n_quantile + 1)));
    knots.insert(knots.end(), extra_knots.begin(), extra_knots.end());
    std::sort(knots.begin(), knots.end());

    std::vector<double> internal;
    std::size_t dropped = 0;
    for (double k : knots) {
        const double tol = 1e-12 * boundary;
        if (k >= boundary - tol || (!internal.empty() && k <= internal.back() + tol)) {
            ++dropped;
            continue;
        }
        internal.push_back(k);
    }
    if (dropped > 0) {
        std::ostringstream msg;
        msg << dropped << " knot(s) coincided with another knot or the upper boundary and were removed; "
            << "basis size reduced accordingly";
        out.warnings.push_back(msg.str());
    }
    out.knots.internal = std::move(internal);
    out.knots.validate();
    return out;
}

namespace {

std::size_t locate_interval(std::span<const double> grid, double t) {
    const std::size_t g = grid.size();
    if (t >= grid.back()) {
        // Left limit at the upper boundary: last interval with positive width.
        std::size_t m = g - 2;
        while (m > 0 && !(grid[m] < grid[m + 1])) --m;
        return m;
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
}

}  // namespace

std::vector<double> mspline_values(std::span<const double> grid, int order, double t) {
    const std::size_t g = grid.size();
    if (g < static_cast<std::size_t>(order) + 1) throw std::invalid_argument("grid too short for spline order");
    t = std::min(t, grid.back());
    std::vector<double> vals(g - 1, 0.0);
    if (t >= grid.front()) {
        const std::size_t m = locate_interval(grid, t);
        const double span = grid[m + 1] - grid[m];
        if (span > 0.0) vals[m] = 1.0 / span;
    }
    for (int q = 2; q <= order; ++q) {
        const std::size_t count = g - static_cast<std::size_t>(q);
        for (std::size_t i = 0; i < count; ++i) {
            const double span = grid[i + q] - grid[i];
            if (span <= 0.0) {
                vals[i] = 0.0;
                continue;
            }
            vals[i] = q * ((t - grid[i]) * vals[i] + (grid[i + q] - t) * vals[i + 1]) / ((q - 1) * span);
        }
        vals.resize(count);
    }
    return vals;
}

std::vector<double> mspline_derivatives(std::span<const double> grid, int order, double t, int deriv) {
    if (deriv == 0) return mspline_values(grid, order, t);
    if (order <= 1) return std::vector<double>(grid.size() - static_cast<std::size_t>(order), 0.0);
    const auto lower = mspline_derivatives(grid, order - 1, t, deriv - 1);
    std::vector<double> out(grid.size() - static_cast<std::size_t>(order), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double span = grid[i + order] - grid[i];
        if (span > 0.0) out[i] = order / span * (lower[i] - lower[i + 1]);
    }
    return out;
}

MSplineBasis::MSplineBasis(KnotSet knots) : knots_(std::move(knots)) {
    knots_.validate();
    const int k = knots_.order;
    grid_.assign(static_cast<std::size_t>(k), 0.0);
    grid_.insert(grid_.end(), knots_.internal.begin(), knots_.internal.end());
    grid_.insert(grid_.end(), static_cast<std::size_t>(k), knots_.upper);
    n_full_ = grid_.size() - static_cast<std::size_t>(k);

    aug_grid_.reserve(grid_.size() + 2);
    aug_grid_.push_back(0.0);
    aug_grid_.insert(aug_grid_.end(), grid_.begin(), grid_.end());
    aug_grid_.push_back(knots_.upper);
}

std::size_t MSplineBasis::size() const noexcept { return smooth_ ? n_full_ - 2 : n_full_; }

std::vector<double> MSplineBasis::breakpoints() const {
    std::vector<double> b{0.0};
    b.insert(b.end(), knots_.internal.begin(), knots_.internal.end());
    b.push_back(knots_.upper);
    return b;
}

void MSplineBasis::full_values(double t, std::span<double> out) const {
    const auto v = mspline_values(grid_, knots_.order, t);
    std::copy(v.begin(), v.end(), out.begin());
}

void MSplineBasis::full_cumulative(double t, std::span<double> out) const {
    const double u = knots_.upper;
    const double tc = std::min(t, u);
    const int k = knots_.order;
    // Integral of an order-k M-spline is a tail sum of order-(k+1) B-splines
    // on the grid with one more boundary knot at each end.
    const auto m = mspline_values(aug_grid_, k + 1, tc);  // n_full + 1 terms
    double tail = 0.0;
    for (std::size_t j = n_full_; j >= 1; --j) {
        tail += (aug_grid_[j + k + 1] - aug_grid_[j]) / (k + 1) * m[j];
        out[j - 1] = std::min(tail, 1.0);
    }
    if (t > u) {
        const auto b = mspline_values(grid_, k, u);
        for (std::size_t i = 0; i < n_full_; ++i) out[i] += (t - u) * b[i];
    }
}

void MSplineBasis::reduce(std::span<const double> full, std::span<double> out) const {
    const std::size_t n = n_full_;
    for (std::size_t i = 0; i + 3 < n; ++i) out[i] = full[i];
    out[n - 3] = (boundary_weights_[0] * full[n - 3] + boundary_weights_[1] * full[n - 2] +
                  boundary_weights_[2] * full[n - 1]) /
                 boundary_norm_;
}

void MSplineBasis::eval(double t, std::span<double> out) const {
    if (t < 0.0 || std::isnan(t)) throw std::domain_error("basis evaluated at negative time");
    if (!smooth_) {
        full_values(t, out);
        return;
    }
    std::vector<double> full(n_full_);
    full_values(t, full);
    reduce(full, out);
}

std::vector<double> MSplineBasis::eval(double t) const {
    std::vector<double> out(size());
    eval(t, out);
    return out;
}

void MSplineBasis::eval_cumulative(double t, std::span<double> out) const {
    if (t < 0.0 || std::isnan(t)) throw std::domain_error("cumulative basis evaluated at negative time");
    if (!smooth_) {
        full_cumulative(t, out);
        return;
    }
    std::vector<double> full(n_full_);
    full_cumulative(t, full);
    reduce(full, out);
}

std::vector<double> MSplineBasis::eval_cumulative(double t) const {
    std::vector<double> out(size());
    eval_cumulative(t, out);
    return out;
}

std::vector<double> MSplineBasis::constant_coefficients() const {
    const int k = knots_.order;
    const double u = knots_.upper;
    std::vector<double> p(n_full_);
    for (std::size_t i = 0; i < n_full_; ++i) p[i] = (grid_[i + k] - grid_[i]) / (k * u);
    if (!smooth_) return p;
    // The combined term carries the hazard level at U; for the constant
    // hazard that is 1/U, scaled by the normalisation of the combined term.
    p.resize(n_full_ - 2);
    p[n_full_ - 3] = boundary_norm_ / u;
    return p;
}

double MSplineBasis::combined_value_at_upper() const noexcept {
    return smooth_ ? 1.0 / boundary_norm_ : 0.0;
}

MSplineBasis reduce_smooth_boundary(const MSplineBasis& basis) {
    if (basis.smooth_) return basis;
    if (basis.order() != 4) throw std::invalid_argument("smooth boundary reduction requires a cubic basis");
    if (basis.n_full_ < 4) throw std::invalid_argument("smooth boundary reduction needs at least four terms");
    MSplineBasis out = basis;
    const std::size_t n = basis.n_full_;
    const double u = basis.upper();
    const auto b0 = mspline_derivatives(basis.grid_, 4, u, 0);
    const auto b1 = mspline_derivatives(basis.grid_, 4, u, 1);
    const auto b2 = mspline_derivatives(basis.grid_, 4, u, 2);
    // h(U) = p_n b_n, h'(U) = p_{n-1} b'_{n-1} + p_n b'_n,
    // h''(U) = p_{n-2} b''_{n-2} + p_{n-1} b''_{n-1} + p_n b''_n.
    const double wn = 1.0 / b0[n - 1];
    const double wn1 = -wn * b1[n - 1] / b1[n - 2];
    const double wn2 = -(wn1 * b2[n - 2] + wn * b2[n - 1]) / b2[n - 3];
    out.boundary_weights_ = {wn2, wn1, wn};
    out.boundary_norm_ = wn2 + wn1 + wn;
    out.smooth_ = true;
    return out;
}

}  // namespace hazspline
