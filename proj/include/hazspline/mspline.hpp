#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hazspline {

/// Knots of an M-spline hazard basis. The lower boundary is always 0.
struct KnotSet {
    std::vector<double> internal;  ///< strictly increasing, all in (0, upper)
    double upper = 1.0;            ///< upper boundary U; the hazard is constant beyond it
    int order = 4;                 ///< k; polynomial degree is k - 1

    void validate() const;
};

struct KnotPlacement {
    KnotSet knots;
    std::vector<std::string> warnings;
};

/// Place knots at equally spaced quantiles of the uncensored times.
///
/// `n_basis` is the number of basis terms the model will carry. With
/// `smooth_boundary` the full cubic basis has n_basis + 2 terms and therefore
/// n_basis - 2 quantile knots (n_basis - 1 knots counting U). Without it there
/// are n_basis - order quantile knots. `extra_knots` are added on top of the
/// quantile knots; the largest of `upper`, the extra knots and the last event
/// time becomes U.
KnotPlacement build_knots(std::span<const double> event_times, int n_basis = 10,
                          std::span<const double> extra_knots = {},
                          std::optional<double> upper = std::nullopt,
                          bool smooth_boundary = true, int order = 4);

/// Evaluable M-spline basis on [0, U] with constant extension past U.
///
/// Terms follow the order-k recursion on the grid t_1..t_{n+k} with k-fold
/// boundary knots. Each unreduced term integrates to one over [0, U]. The
/// smooth-boundary variant replaces the last three cubic terms with a single
/// combined term whose first and second derivatives vanish at U; the combined
/// term is normalised to integrate to one as well, so coefficient vectors stay
/// on the simplex.
class MSplineBasis {
public:
    explicit MSplineBasis(KnotSet knots);

    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::size_t full_size() const noexcept { return n_full_; }
    [[nodiscard]] bool smooth_boundary() const noexcept { return smooth_; }
    [[nodiscard]] const KnotSet& knots() const noexcept { return knots_; }
    [[nodiscard]] std::span<const double> grid() const noexcept { return grid_; }
    [[nodiscard]] double upper() const noexcept { return knots_.upper; }
    [[nodiscard]] int order() const noexcept { return knots_.order; }

    /// 0, the internal knots and U: the points where the hazard is not smooth.
    [[nodiscard]] std::vector<double> breakpoints() const;

    [[nodiscard]] std::vector<double> eval(double t) const;
    void eval(double t, std::span<double> out) const;

    /// I_i(t) = integral of term i over [0, t].
    [[nodiscard]] std::vector<double> eval_cumulative(double t) const;
    void eval_cumulative(double t, std::span<double> out) const;

    /// Coefficients giving a hazard equal to 1/U on [0, U].
    [[nodiscard]] std::vector<double> constant_coefficients() const;

    /// Weights (w_{n-2}, w_{n-1}, w_n) of the smooth combined term before
    /// normalisation, scaled so that the unnormalised combination equals 1 at U.
    [[nodiscard]] const std::vector<double>& boundary_weights() const noexcept { return boundary_weights_; }

    /// Value of the normalised combined term at U. Multiplying the combined
    /// coefficient by this gives h(U) when eta = 1.
    [[nodiscard]] double combined_value_at_upper() const noexcept;

    friend MSplineBasis reduce_smooth_boundary(const MSplineBasis& basis);

private:
    void full_values(double t, std::span<double> out) const;
    void full_cumulative(double t, std::span<double> out) const;
    void reduce(std::span<const double> full, std::span<double> out) const;

    KnotSet knots_;
    std::vector<double> grid_;       // t_1..t_{n+k}
    std::vector<double> aug_grid_;   // grid with one extra knot at each boundary
    std::size_t n_full_ = 0;
    bool smooth_ = false;
    std::vector<double> boundary_weights_;
    double boundary_norm_ = 1.0;     // sum of boundary_weights_
};

/// Cubic basis with zero first and second hazard derivative at U (n - 2 terms).
MSplineBasis reduce_smooth_boundary(const MSplineBasis& basis);

/// Values of all order-`order` M-splines on `grid` at t (length grid.size() - order).
/// At t >= grid.back() the left limit at the last knot is used.
std::vector<double> mspline_values(std::span<const double> grid, int order, double t);

/// First and second derivatives (left limits at the final knot) of all
/// order-`order` M-splines on `grid` at t.
std::vector<double> mspline_derivatives(std::span<const double> grid, int order, double t, int deriv);

}  // namespace hazspline
