#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hazspline/evidence.hpp"
#include "hazspline/mspline.hpp"

namespace hazspline {

/// Ratio between the 90% and 10% quantiles of prior hazard curves, evaluated on
/// an equally spaced grid from 0 to the upper knot. Each simulation draws sigma,
/// the spline logits and the scale from the prior.
std::vector<double> simulate_prior_rho(const MSplineBasis& basis, const PriorConfig& priors, std::size_t n_sims,
                                       std::size_t grid_size, std::mt19937_64& rng);

/// Same, with sigma supplied per simulation and standard logistic innovations
/// fixed, so that different sigma priors can be compared on common random numbers.
std::vector<double> rho_from_innovations(const MSplineBasis& basis, const std::vector<double>& sigma,
                                         const std::vector<std::vector<double>>& innovations, std::size_t grid_size);

struct SigmaCalibration {
    GammaPrior prior;
    double median_rho = 0.0;
    double upper_rho = 0.0;  ///< 97.5% quantile
    bool attained = false;
    std::string note;
};

/// Gamma prior for sigma whose induced rho distribution has the requested
/// median and 97.5% quantile. The rate is found by bisection with shape 2; if
/// the upper target is then missed, the shape is searched as well.
SigmaCalibration calibrate_sigma_prior(double target_median, double target_upper, const MSplineBasis& basis,
                                       std::size_t n_sims = 5000, std::size_t grid_size = 100,
                                       std::uint64_t seed = 1);

struct ScaleCalibration {
    NormalPrior prior;
    double low = 0.0;   ///< induced 95% interval for mean survival
    double high = 0.0;
    bool symmetric = true;  ///< false when the interval could not match both ends
    std::string note;
};

/// Normal prior for log eta0 from a prior guess of mean survival under the
/// constant-hazard mapping mean = U / eta0. The location puts the prior median
/// at `target_mean`; the scale is the smallest one whose 95% interval contains
/// [low, high].
ScaleCalibration calibrate_scale_prior(double target_mean, double low, double high, const MSplineBasis& basis);

/// Prior draws of U / eta0, the mean survival implied by a constant hazard.
std::vector<double> simulate_prior_mean_survival(const MSplineBasis& basis, const PriorConfig& priors,
                                                 std::size_t n_sims, std::mt19937_64& rng);

}  // namespace hazspline
