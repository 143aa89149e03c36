#include "hazspline/loo.hpp"

#include <cmath>
#include <stdexcept>

#include "hazspline/stats.hpp"

namespace hazspline {

LooResult loo(const Eigen::MatrixXd& loglik) {
    const Eigen::Index s = loglik.rows();
    const Eigen::Index n = loglik.cols();
    if (s < 2) throw std::invalid_argument("leave-one-out needs at least two draws");
    LooResult out;
    out.elpd.resize(static_cast<std::size_t>(n));
    out.max_weight.resize(static_cast<std::size_t>(n));
    out.weight_ess.resize(static_cast<std::size_t>(n));
    out.unreliable.resize(static_cast<std::size_t>(n));
    std::vector<double> neg(static_cast<std::size_t>(s));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < s; ++d) neg[static_cast<std::size_t>(d)] = -loglik(d, i);
        const double lse = log_sum_exp(neg);
        const auto k = static_cast<std::size_t>(i);
        out.elpd[k] = std::log(static_cast<double>(s)) - lse;
        double max_w = 0.0, sum_sq = 0.0;
        for (double v : neg) {
            const double w = std::exp(v - lse);
            max_w = std::max(max_w, w);
            sum_sq += w * w;
        }
        out.max_weight[k] = max_w;
        out.weight_ess[k] = 1.0 / sum_sq;
        out.unreliable[k] = !(max_w <= 0.5) || !std::isfinite(out.elpd[k]);
        if (out.unreliable[k]) ++out.n_unreliable;
        out.elpd_total += out.elpd[k];
    }
    out.looic = -2.0 * out.elpd_total;
    double mean = out.elpd_total / static_cast<double>(n), var = 0.0;
    for (double e : out.elpd) var += (e - mean) * (e - mean);
    if (n > 1) out.se_looic = 2.0 * std::sqrt(static_cast<double>(n) * var / static_cast<double>(n - 1));
    return out;
}

}  // namespace hazspline
