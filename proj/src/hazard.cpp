#include "hazspline/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hazspline/stats.hpp"

namespace hazspline {

BackgroundHazard::BackgroundHazard(std::vector<double> breakpoints, std::vector<double> rates)
    : breaks_(std::move(breakpoints)), rates_(std::move(rates)) {
    if (breaks_.empty() || breaks_.size() != rates_.size())
        throw std::invalid_argument("background hazard needs one rate per breakpoint");
    if (breaks_.front() != 0.0) throw std::invalid_argument("background hazard must start at time 0");
    for (std::size_t j = 1; j < breaks_.size(); ++j)
        if (!(breaks_[j] > breaks_[j - 1]))
            throw std::invalid_argument("background hazard breakpoints must be strictly increasing");
    for (double r : rates_)
        if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("background rates must be non-negative");
    cum_at_break_.resize(breaks_.size());
    cum_at_break_[0] = 0.0;
    for (std::size_t j = 1; j < breaks_.size(); ++j)
        cum_at_break_[j] = cum_at_break_[j - 1] + rates_[j - 1] * (breaks_[j] - breaks_[j - 1]);
}

double BackgroundHazard::rate(double t) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    const auto j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - breaks_.begin() - 1, 0));
    return rates_[j];
}

double BackgroundHazard::cumulative(double t) const {
    if (t <= 0.0) return 0.0;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    const auto j = static_cast<std::size_t>(it - breaks_.begin() - 1);
    return cum_at_break_[j] + rates_[j] * (t - breaks_[j]);
}

double BackgroundHazard::survival(double t) const { return std::exp(-cumulative(t)); }

double background_survival(const BackgroundHazard& bg, double t) { return bg.survival(t); }

void MechanismConfig::validate() const {
    if (additive && !background) throw std::invalid_argument("additive hazards require a background hazard");
}

std::vector<double> coefficients_for(const HazardParams& params, const MSplineBasis& basis,
                                     std::span<const double> x) {
    const std::size_t m = basis.size();
    if (params.gamma.size() != m) throw std::invalid_argument("gamma length does not match the basis size");
    const bool nonph = params.delta.size() > 0;
    if (nonph && (static_cast<std::size_t>(params.delta.rows()) != m ||
                  static_cast<std::size_t>(params.delta.cols()) != x.size()))
        throw std::invalid_argument("delta dimensions do not match basis and covariates");
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) {
        double g = i == 0 ? 0.0 : params.gamma[i];
        if (nonph && i > 0)
            for (std::size_t s = 0; s < x.size(); ++s) g += params.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) * x[s];
        logits[i] = g;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& g : logits) {
        g = std::exp(g - mx);
        total += g;
    }
    for (double& g : logits) g /= total;
    return logits;
}

double scale_for(const HazardParams& params, std::span<const double> x) {
    if (params.beta.size() != x.size()) throw std::invalid_argument("beta length does not match covariates");
    double lp = params.log_eta0;
    for (std::size_t s = 0; s < x.size(); ++s) lp += params.beta[s] * x[s];
    return std::exp(lp);
}

CureValues apply_cure(double p_cure, double s0, double f0) {
    if (!(p_cure >= 0.0 && p_cure <= 1.0)) throw std::invalid_argument("cure probability must be in [0, 1]");
    const double s = p_cure + (1.0 - p_cure) * s0;
    if (p_cure >= 1.0 || s <= 0.0) return {s, p_cure >= 1.0 ? 0.0 : f0 / s0};
    return {s, (1.0 - p_cure) * f0 / s};
}

double cure_log_survival(double log_p, double log_1mp, double cum0) {
    if (cum0 < 1.0) return std::min(0.0, std::log1p(std::exp(log_1mp) * std::expm1(-cum0)));
    return std::min(0.0, log_sum_exp(log_p, log_1mp - cum0));
}

HazardPoint combine_hazard(double eta, std::span<const double> coef, std::span<const double> b,
                           std::span<const double> ib, const MechanismConfig& mech,
                           std::optional<double> cure_p, double t) {
    double bsum = 0.0;
    double isum = 0.0;
    for (std::size_t i = 0; i < coef.size(); ++i) {
        bsum += coef[i] * b[i];
        isum += coef[i] * ib[i];
    }
    double h = eta * bsum;
    double cum = eta * isum;
    if (mech.cure) {
        const double p = cure_p.value_or(0.0);
        double log_sc;
        if (p <= 0.0) {
            log_sc = -cum;
        } else if (p >= 1.0) {
            log_sc = 0.0;
        } else {
            log_sc = cure_log_survival(std::log(p), std::log1p(-p), cum);
        }
        h = p >= 1.0 ? 0.0 : h * std::exp(std::log1p(-p) - cum - log_sc);
        cum = -log_sc;
    }
    if (mech.additive) {
        h += mech.background->rate(t);
        cum += mech.background->cumulative(t);
    }
    return {h, cum};
}

HazardPoint evaluate_hazard(const HazardParams& params, const MSplineBasis& basis,
                            const MechanismConfig& mech, std::span<const double> x, double t) {
    if (t < 0.0 || std::isnan(t)) throw std::domain_error("hazard evaluated at negative time");
    const auto coef = coefficients_for(params, basis, x);
    const double eta = scale_for(params, x);
    const auto b = basis.eval(t);
    const auto ib = basis.eval_cumulative(t);
    return combine_hazard(eta, coef, b, ib, mech, params.cure_p, t);
}

double hazard(const HazardParams& params, const MSplineBasis& basis, const MechanismConfig& mech,
              std::span<const double> x, double t) {
    return evaluate_hazard(params, basis, mech, x, t).hazard;
}

double cumulative_hazard(const HazardParams& params, const MSplineBasis& basis,
                         const MechanismConfig& mech, std::span<const double> x, double t) {
    return evaluate_hazard(params, basis, mech, x, t).cumhaz;
}

double survival(const HazardParams& params, const MSplineBasis& basis, const MechanismConfig& mech,
                std::span<const double> x, double t) {
    return std::exp(-cumulative_hazard(params, basis, mech, x, t));
}

}  // namespace hazspline
