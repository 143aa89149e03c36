#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hazspline/mspline.hpp"

namespace hazspline {

using CovariateVector = std::vector<double>;

/// Known piecewise-constant hazard. Interval j is [breakpoints[j], breakpoints[j+1]),
/// and the last interval extends to infinity.
class BackgroundHazard {
public:
    BackgroundHazard(std::vector<double> breakpoints, std::vector<double> rates);

    [[nodiscard]] double rate(double t) const;
    [[nodiscard]] double cumulative(double t) const;
    [[nodiscard]] double survival(double t) const;
    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breaks_; }
    [[nodiscard]] const std::vector<double>& rates() const noexcept { return rates_; }

private:
    std::vector<double> breaks_;
    std::vector<double> rates_;
    std::vector<double> cum_at_break_;
};

double background_survival(const BackgroundHazard& bg, double t);

struct MechanismConfig {
    bool cure = false;
    bool additive = false;
    std::optional<BackgroundHazard> background;

    void validate() const;
};

/// Constrained model parameters for one posterior draw.
struct HazardParams {
    double log_eta0 = 0.0;
    std::vector<double> gamma;   ///< spline logits, gamma[0] == 0
    double sigma = 1.0;
    std::vector<double> beta;    ///< log hazard ratios, one per covariate
    Eigen::MatrixXd delta;       ///< n_basis x n_covariates; empty for proportional hazards
    std::vector<double> tau;     ///< non-proportionality scales, one per covariate
    std::optional<double> cure_p;
};

/// p_i(x) = softmax(gamma_i + delta_i' x).
std::vector<double> coefficients_for(const HazardParams& params, const MSplineBasis& basis,
                                     std::span<const double> x);

/// Scale eta(x) = eta0 exp(beta' x).
double scale_for(const HazardParams& params, std::span<const double> x);

struct CureValues {
    double survival;
    double hazard;
};

/// Mixture cure: S = p + (1-p) S0 and h = (1-p) f0 / (p + (1-p) S0).
CureValues apply_cure(double p_cure, double s0, double f0);

/// log(p + (1-p) exp(-cum0)) given log p and log(1-p), accurate at both ends.
double cure_log_survival(double log_p, double log_1mp, double cum0);

struct HazardPoint {
    double hazard = 0.0;
    double cumhaz = 0.0;  ///< -log survival
};

/// Combine spline pieces into the overall hazard at t. `eta` is the scale for
/// this covariate pattern, `coef` its simplex, `b`/`ib` the basis and
/// cumulative basis at t.
HazardPoint combine_hazard(double eta, std::span<const double> coef, std::span<const double> b,
                           std::span<const double> ib, const MechanismConfig& mech,
                           std::optional<double> cure_p, double t);

HazardPoint evaluate_hazard(const HazardParams& params, const MSplineBasis& basis,
                            const MechanismConfig& mech, std::span<const double> x, double t);

double hazard(const HazardParams& params, const MSplineBasis& basis, const MechanismConfig& mech,
              std::span<const double> x, double t);
double cumulative_hazard(const HazardParams& params, const MSplineBasis& basis,
                         const MechanismConfig& mech, std::span<const double> x, double t);
double survival(const HazardParams& params, const MSplineBasis& basis, const MechanismConfig& mech,
                std::span<const double> x, double t);

}  // namespace hazspline
