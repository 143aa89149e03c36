#pragma once

#include <vector>

#include <Eigen/Dense>

namespace hazspline {

/// Importance-sampling leave-one-out, with weights proportional to
/// 1 / p(y_i | theta_s) and no Pareto smoothing.
struct LooResult {
    std::vector<double> elpd;
    std::vector<double> max_weight;   ///< largest self-normalised weight per observation
    std::vector<double> weight_ess;   ///< 1 / sum of squared weights
    std::vector<bool> unreliable;     ///< one draw carries more than half the weight
    double elpd_total = 0.0;
    double looic = 0.0;
    double se_looic = 0.0;
    std::size_t n_unreliable = 0;
};

/// `loglik` is draws x observations.
LooResult loo(const Eigen::MatrixXd& loglik);

}  // namespace hazspline
