#include "hazspline/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hazspline/stats.hpp"

namespace hazspline {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// logistic(0, 1) variate by inversion
double draw_logistic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0 || u >= 1.0) u = unif(rng);
    return std::log(u) - std::log1p(-u);
}

// log S(v)/S(u) from the increment d_h0 in the spline cumulative hazard, so a
// cure plateau does not cancel. q_u is the uncured share of survivors at u.
double log_conditional_survival(double d_h0, bool cure, double q_u, double d_bg) {
    d_h0 = std::max(0.0, d_h0);
    const double lc = cure ? std::log1p(q_u * std::expm1(-d_h0)) : -d_h0;
    return std::min(0.0, lc - d_bg);
}

double draw_gamma(std::mt19937_64& rng, double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(rng);
}

}  // namespace

void ExternalRow::validate() const {
    if (!(start >= 0.0)) throw std::invalid_argument("external start time must be non-negative");
    if (!(stop > start)) throw std::invalid_argument("external stop time must exceed start time");
    if (!(n > 0.0)) throw std::invalid_argument("external n must be positive");
    if (!(r >= 0.0 && r <= n)) throw std::invalid_argument("external r must lie in [0, n]");
}

std::vector<double> Dataset::event_times() const {
    std::vector<double> t;
    for (const auto& rec : individual)
        if (rec.event) t.push_back(rec.time);
    return t;
}

ExternalRow elicitation_to_external(double a, double b, double u, double v, CovariateVector x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("elicited Beta parameters must be positive");
    ExternalRow row{u, v, a + b, a, std::move(x)};
    row.validate();
    return row;
}

NormalPrior PriorConfig::loghr_for(std::size_t c) const {
    if (loghr.empty()) return {0.0, 2.5};
    return loghr.size() == 1 ? loghr.front() : loghr.at(c);
}

GammaPrior PriorConfig::tau_for(std::size_t c) const {
    if (tau.empty()) return {2.0, 1.0};
    return tau.size() == 1 ? tau.front() : tau.at(c);
}

void PriorConfig::validate() const {
    auto bad = [](double v) { return !(v > 0.0) || !std::isfinite(v); };
    if (bad(log_eta0.scale)) throw std::invalid_argument("log_eta0 prior scale must be positive");
    for (const auto& p : loghr)
        if (bad(p.scale)) throw std::invalid_argument("log hazard ratio prior scale must be positive");
    if (bad(sigma.shape) || bad(sigma.rate)) throw std::invalid_argument("sigma prior shape and rate must be positive");
    for (const auto& p : tau)
        if (bad(p.shape) || bad(p.rate)) throw std::invalid_argument("tau prior shape and rate must be positive");
    if (bad(cure.a) || bad(cure.b)) throw std::invalid_argument("cure prior parameters must be positive");
}

ParameterLayout ParameterLayout::make(const ModelSpec& spec) {
    ParameterLayout l;
    l.n_basis = spec.n_basis();
    l.n_cov = spec.n_cov();
    l.nonprop = spec.nonprop && l.n_cov > 0;
    l.cure = spec.mech.cure;
    std::size_t pos = 0;
    l.log_eta0 = pos++;
    l.z = pos;
    pos += l.n_basis - 1;
    l.log_sigma = pos++;
    l.beta = pos;
    pos += l.n_cov;
    l.zeta = pos;
    if (l.nonprop) pos += (l.n_basis - 1) * l.n_cov;
    l.log_tau = pos;
    if (l.nonprop) pos += l.n_cov;
    l.logit_cure = pos;
    if (l.cure) ++pos;
    l.dim = pos;
    l.constrained_dim = pos + 1;
    return l;
}

std::vector<std::string> ParameterLayout::constrained_names(const std::vector<std::string>& covariates) const {
    std::vector<std::string> names{"eta0"};
    for (std::size_t i = 0; i < n_basis; ++i) names.push_back("p[" + std::to_string(i + 1) + "]");
    names.emplace_back("sigma");
    for (std::size_t c = 0; c < n_cov; ++c) names.push_back("loghr[" + covariates[c] + "]");
    if (nonprop) {
        for (std::size_t i = 1; i < n_basis; ++i)
            for (std::size_t c = 0; c < n_cov; ++c)
                names.push_back("delta[" + std::to_string(i + 1) + "," + covariates[c] + "]");
        for (std::size_t c = 0; c < n_cov; ++c) names.push_back("tau[" + covariates[c] + "]");
    }
    if (cure) names.emplace_back("cure_p");
    return names;
}

std::vector<double> constant_hazard_logits(const MSplineBasis& basis) {
    const auto p = basis.constant_coefficients();
    std::vector<double> mu(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) mu[i] = std::log(p[i]) - std::log(p[0]);
    return mu;
}

HazardParams params_from_constrained(const ModelSpec& spec, std::span<const double> row) {
    const auto l = ParameterLayout::make(spec);
    if (row.size() != l.constrained_dim) throw std::invalid_argument("constrained draw has the wrong length");
    HazardParams hp;
    std::size_t pos = 0;
    hp.log_eta0 = std::log(row[pos++]);
    hp.gamma.resize(l.n_basis);
    const double logp0 = std::log(row[pos]);
    for (std::size_t i = 0; i < l.n_basis; ++i) hp.gamma[i] = i == 0 ? 0.0 : std::log(row[pos + i]) - logp0;
    pos += l.n_basis;
    hp.sigma = row[pos++];
    hp.beta.assign(row.begin() + static_cast<std::ptrdiff_t>(pos), row.begin() + static_cast<std::ptrdiff_t>(pos + l.n_cov));
    pos += l.n_cov;
    if (l.nonprop) {
        hp.delta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l.n_basis), static_cast<Eigen::Index>(l.n_cov));
        for (std::size_t i = 1; i < l.n_basis; ++i)
            for (std::size_t c = 0; c < l.n_cov; ++c) hp.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[pos++];
        hp.tau.assign(row.begin() + static_cast<std::ptrdiff_t>(pos), row.begin() + static_cast<std::ptrdiff_t>(pos + l.n_cov));
        pos += l.n_cov;
    }
    if (l.cure) hp.cure_p = row[pos++];
    return hp;
}

std::vector<double> constrained_from_params(const ModelSpec& spec, const HazardParams& params) {
    const auto l = ParameterLayout::make(spec);
    std::vector<double> row;
    row.reserve(l.constrained_dim);
    row.push_back(std::exp(params.log_eta0));
    HazardParams base = params;
    base.delta.resize(0, 0);
    const std::vector<double> zeros(l.n_cov, 0.0);
    base.beta.assign(l.n_cov, 0.0);
    const auto p = coefficients_for(base, spec.basis, zeros);
    row.insert(row.end(), p.begin(), p.end());
    row.push_back(params.sigma);
    row.insert(row.end(), params.beta.begin(), params.beta.end());
    if (l.nonprop) {
        for (std::size_t i = 1; i < l.n_basis; ++i)
            for (std::size_t c = 0; c < l.n_cov; ++c)
                row.push_back(params.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        row.insert(row.end(), params.tau.begin(), params.tau.end());
    }
    if (l.cure) row.push_back(params.cure_p.value_or(0.0));
    if (row.size() != l.constrained_dim) throw std::invalid_argument("parameters do not match the model layout");
    return row;
}

LogLik loglik_individual(std::span<const IndividualRecord> records, const HazardParams& params,
                         const MSplineBasis& basis, const MechanismConfig& mech) {
    LogLik out;
    out.pointwise.reserve(records.size());
    for (const auto& rec : records) {
        const auto pt = evaluate_hazard(params, basis, mech, rec.x, rec.time);
        double ll = -pt.cumhaz;
        if (rec.event) ll += pt.hazard > 0.0 ? std::log(pt.hazard) : kNegInf;
        out.pointwise.push_back(ll);
        out.total += ll;
    }
    return out;
}

LogLik loglik_external(std::span<const ExternalRow> rows, const HazardParams& params,
                       const MSplineBasis& basis, const MechanismConfig& mech) {
    LogLik out;
    out.pointwise.reserve(rows.size());
    for (const auto& row : rows) {
        const MechanismConfig spline_only;
        const double h0u = evaluate_hazard(params, basis, spline_only, row.x, row.start).cumhaz;
        const double h0v = evaluate_hazard(params, basis, spline_only, row.x, row.stop).cumhaz;
        double q_u = 1.0;
        if (mech.cure) {
            const double p = params.cure_p.value_or(0.0);
            const double s0 = std::exp(-h0u);
            q_u = (1.0 - p) * s0 / apply_cure(p, s0, 0.0).survival;
        }
        const double d_bg = mech.additive
                                ? mech.background->cumulative(row.stop) - mech.background->cumulative(row.start)
                                : 0.0;
        const double log_p = log_conditional_survival(h0v - h0u, mech.cure, q_u, d_bg);
        const double log_1mp = std::log(-std::expm1(log_p));
        double ll = log_choose(row.n, row.r);
        if (row.r > 0.0) ll += row.r * log_p;
        if (row.n - row.r > 0.0) ll += (row.n - row.r) * log_1mp;
        if (std::isnan(ll)) ll = kNegInf;
        out.pointwise.push_back(ll);
        out.total += ll;
    }
    return out;
}

double log_prior_constrained(const ModelSpec& spec, const HazardParams& params, const PriorConfig& priors) {
    const auto l = ParameterLayout::make(spec);
    const auto mu = constant_hazard_logits(spec.basis);
    double lp = normal_lpdf(params.log_eta0, priors.log_eta0.location, priors.log_eta0.scale);
    for (std::size_t i = 1; i < l.n_basis; ++i) lp += logistic_lpdf(params.gamma[i], mu[i], params.sigma);
    lp += gamma_lpdf(params.sigma, priors.sigma.shape, priors.sigma.rate);
    for (std::size_t c = 0; c < l.n_cov; ++c) {
        const auto pr = priors.loghr_for(c);
        lp += normal_lpdf(params.beta[c], pr.location, pr.scale);
    }
    if (l.nonprop) {
        for (std::size_t c = 0; c < l.n_cov; ++c) {
            for (std::size_t i = 1; i < l.n_basis; ++i)
                lp += normal_lpdf(params.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)), 0.0, params.tau[c]);
            const auto pr = priors.tau_for(c);
            lp += gamma_lpdf(params.tau[c], pr.shape, pr.rate);
        }
    }
    if (l.cure) lp += beta_lpdf(*params.cure_p, priors.cure.a, priors.cure.b);
    return lp;
}

SurvivalModel::SurvivalModel(ModelSpec spec, Dataset data, PriorConfig priors)
    : spec_(std::move(spec)), data_(std::move(data)), priors_(std::move(priors)) {
    spec_.mech.validate();
    priors_.validate();
    if (spec_.covariates.size() != data_.covariates.size())
        throw std::invalid_argument("model covariates do not match the dataset");
    layout_ = ParameterLayout::make(spec_);
    if (layout_.n_basis < 2) throw std::invalid_argument("spline basis needs at least two terms");
    mu_ = constant_hazard_logits(spec_.basis);

    const std::size_t nc = spec_.n_cov();
    for (const auto& rec : data_.individual) {
        if (!(rec.time > 0.0)) throw std::invalid_argument("individual survival times must be positive");
        if (rec.x.size() != nc) throw std::invalid_argument("individual record has the wrong number of covariates");
        ind_pattern_.push_back(pattern_index(rec.x));
        ind_points_.push_back(precompute(rec.time));
    }
    for (const auto& row : data_.external) {
        row.validate();
        if (row.x.size() != nc) throw std::invalid_argument("external row has the wrong number of covariates");
        ext_pattern_.push_back(pattern_index(row.x));
        ext_start_.push_back(precompute(row.start));
        ext_stop_.push_back(precompute(row.stop));
    }
}

std::size_t SurvivalModel::pattern_index(const std::vector<double>& x) {
    for (std::size_t k = 0; k < patterns_.size(); ++k)
        if (patterns_[k].x == x) return k;
    patterns_.push_back({x});
    return patterns_.size() - 1;
}

SurvivalModel::TimePoint SurvivalModel::precompute(double t) const {
    TimePoint tp;
    tp.b = spec_.basis.eval(t);
    tp.ib = spec_.basis.eval_cumulative(t);
    if (spec_.mech.additive) {
        tp.bg_rate = spec_.mech.background->rate(t);
        tp.bg_cum = spec_.mech.background->cumulative(t);
    }
    return tp;
}

HazardParams SurvivalModel::to_params(const Eigen::VectorXd& theta) const {
    const auto& l = layout_;
    HazardParams hp;
    hp.log_eta0 = theta[static_cast<Eigen::Index>(l.log_eta0)];
    hp.sigma = std::exp(theta[static_cast<Eigen::Index>(l.log_sigma)]);
    hp.gamma.assign(l.n_basis, 0.0);
    for (std::size_t i = 1; i < l.n_basis; ++i)
        hp.gamma[i] = mu_[i] + hp.sigma * theta[static_cast<Eigen::Index>(l.z + i - 1)];
    hp.beta.resize(l.n_cov);
    for (std::size_t c = 0; c < l.n_cov; ++c) hp.beta[c] = theta[static_cast<Eigen::Index>(l.beta + c)];
    if (l.nonprop) {
        hp.tau.resize(l.n_cov);
        for (std::size_t c = 0; c < l.n_cov; ++c) hp.tau[c] = std::exp(theta[static_cast<Eigen::Index>(l.log_tau + c)]);
        hp.delta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l.n_basis), static_cast<Eigen::Index>(l.n_cov));
        for (std::size_t i = 1; i < l.n_basis; ++i)
            for (std::size_t c = 0; c < l.n_cov; ++c)
                hp.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    hp.tau[c] * theta[static_cast<Eigen::Index>(l.zeta + (i - 1) * l.n_cov + c)];
    }
    if (l.cure) hp.cure_p = inv_logit(theta[static_cast<Eigen::Index>(l.logit_cure)]);
    return hp;
}

Eigen::VectorXd SurvivalModel::to_constrained(const Eigen::VectorXd& theta) const {
    const auto row = constrained_from_params(spec_, to_params(theta));
    return Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
}

Eigen::VectorXd SurvivalModel::from_params(const HazardParams& hp) const {
    const auto& l = layout_;
    Eigen::VectorXd theta(static_cast<Eigen::Index>(l.dim));
    theta[static_cast<Eigen::Index>(l.log_eta0)] = hp.log_eta0;
    theta[static_cast<Eigen::Index>(l.log_sigma)] = std::log(hp.sigma);
    for (std::size_t i = 1; i < l.n_basis; ++i)
        theta[static_cast<Eigen::Index>(l.z + i - 1)] = (hp.gamma[i] - mu_[i]) / hp.sigma;
    for (std::size_t c = 0; c < l.n_cov; ++c) theta[static_cast<Eigen::Index>(l.beta + c)] = hp.beta[c];
    if (l.nonprop) {
        for (std::size_t c = 0; c < l.n_cov; ++c) theta[static_cast<Eigen::Index>(l.log_tau + c)] = std::log(hp.tau[c]);
        for (std::size_t i = 1; i < l.n_basis; ++i)
            for (std::size_t c = 0; c < l.n_cov; ++c)
                theta[static_cast<Eigen::Index>(l.zeta + (i - 1) * l.n_cov + c)] =
                    hp.delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) / hp.tau[c];
    }
    if (l.cure) theta[static_cast<Eigen::Index>(l.logit_cure)] = logit(*hp.cure_p);
    return theta;
}

double SurvivalModel::log_prior(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g;
    return log_prior(theta, g);
}

double SurvivalModel::log_prior(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const auto& l = layout_;
    grad = Eigen::VectorXd::Zero(theta.size());
    auto at = [&](std::size_t i) { return theta[static_cast<Eigen::Index>(i)]; };
    auto g = [&](std::size_t i) -> double& { return grad[static_cast<Eigen::Index>(i)]; };

    const auto& pe = priors_.log_eta0;
    double lp = normal_lpdf(at(l.log_eta0), pe.location, pe.scale);
    g(l.log_eta0) = -(at(l.log_eta0) - pe.location) / (pe.scale * pe.scale);

    for (std::size_t i = 0; i + 1 < l.n_basis; ++i) {
        const double z = at(l.z + i);
        lp += logistic_lpdf(z, 0.0, 1.0);
        g(l.z + i) = -std::tanh(0.5 * z);
    }

    // Gamma prior on a positive parameter stored on the log scale, with Jacobian.
    auto log_gamma_term = [&](std::size_t idx, const GammaPrior& pr) {
        const double ls = at(idx);
        const double s = std::exp(ls);
        lp += gamma_lpdf(s, pr.shape, pr.rate) + ls;
        g(idx) = pr.shape - pr.rate * s;
    };
    log_gamma_term(l.log_sigma, priors_.sigma);

    for (std::size_t c = 0; c < l.n_cov; ++c) {
        const auto pr = priors_.loghr_for(c);
        const double b = at(l.beta + c);
        lp += normal_lpdf(b, pr.location, pr.scale);
        g(l.beta + c) = -(b - pr.location) / (pr.scale * pr.scale);
    }
    if (l.nonprop) {
        const std::size_t nz = (l.n_basis - 1) * l.n_cov;
        for (std::size_t i = 0; i < nz; ++i) {
            const double z = at(l.zeta + i);
            lp += normal_lpdf(z, 0.0, 1.0);
            g(l.zeta + i) = -z;
        }
        for (std::size_t c = 0; c < l.n_cov; ++c) log_gamma_term(l.log_tau + c, priors_.tau_for(c));
    }
    if (l.cure) {
        const double x = at(l.logit_cure);
        const double log_p = -softplus(-x);
        const double log_1mp = -softplus(x);
        const auto& pr = priors_.cure;
        lp += std::lgamma(pr.a + pr.b) - std::lgamma(pr.a) - std::lgamma(pr.b) + pr.a * log_p + pr.b * log_1mp;
        const double p = inv_logit(x);
        g(l.logit_cure) = pr.a * (1.0 - p) - pr.b * p;
    }
    return lp;
}

double SurvivalModel::accumulate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                                 Eigen::VectorXd* pointwise) const {
    const auto& l = layout_;
    const std::size_t m = l.n_basis;
    const std::size_t nc = l.n_cov;
    const HazardParams hp = to_params(theta);
    const bool cure = l.cure;
    const bool additive = spec_.mech.additive;

    double log_pc = 0.0, log_1mpc = 0.0, pc = 0.0;
    if (cure) {
        const double x = theta[static_cast<Eigen::Index>(l.logit_cure)];
        log_pc = -softplus(-x);
        log_1mpc = -softplus(x);
        pc = std::exp(log_pc);
    }
    const double pc_1mpc = cure ? std::exp(log_pc + log_1mpc) : 0.0;

    const std::size_t np = patterns_.size();
    std::vector<PatternState> state(np);
    for (std::size_t k = 0; k < np; ++k) {
        state[k].eta = scale_for(hp, patterns_[k].x);
        state[k].p = coefficients_for(hp, spec_.basis, patterns_[k].x);
    }
    std::vector<double> g_lp, g_logit;
    double g_lc = 0.0;
    if (grad) {
        g_lp.assign(np, 0.0);
        g_logit.assign(np * m, 0.0);
    }

    // log S at a time point and its partials with respect to log h0 (always 0),
    // H0 and the cure logit.
    struct SurvTerms {
        double log_s, d_h0, d_lc, h0, cum0, bsum, isum, q, s0, sc;
    };
    auto surv_terms = [&](const PatternState& ps, const TimePoint& tp) {
        SurvTerms st{};
        for (std::size_t i = 0; i < m; ++i) {
            st.bsum += ps.p[i] * tp.b[i];
            st.isum += ps.p[i] * tp.ib[i];
        }
        st.h0 = ps.eta * st.bsum;
        st.cum0 = ps.eta * st.isum;
        if (!cure) {
            st.log_s = -st.cum0;
            st.d_h0 = -1.0;
            st.q = 1.0;
        } else {
            const double log_sc = cure_log_survival(log_pc, log_1mpc, st.cum0);
            st.s0 = std::exp(-st.cum0);
            st.sc = std::exp(log_sc);
            st.q = std::exp(log_1mpc - st.cum0 - log_sc);
            st.log_s = log_sc;
            st.d_h0 = -st.q;
            st.d_lc = pc_1mpc * (1.0 - st.s0) / st.sc;
        }
        if (additive) st.log_s -= tp.bg_cum;
        return st;
    };
    auto push_grad = [&](std::size_t k, const TimePoint& tp, double a_logh0, double d_h0, double d_lc,
                         const SurvTerms& st) {
        const auto& ps = state[k];
        const double bsum = st.bsum;
        const double isum = st.isum;
        g_lp[k] += a_logh0 + d_h0 * st.cum0;
        g_lc += d_lc;
        double* gl = &g_logit[k * m];
        const double ca = bsum > 0.0 ? a_logh0 / bsum : 0.0;
        const double cd = d_h0 * ps.eta;
        for (std::size_t i = 0; i < m; ++i)
            gl[i] += ps.p[i] * (ca * (tp.b[i] - bsum) + cd * (tp.ib[i] - isum));
    };

    double total = 0.0;
    bool failed = false;
    for (std::size_t r = 0; r < data_.individual.size(); ++r) {
        const std::size_t k = ind_pattern_[r];
        const auto& tp = ind_points_[r];
        const auto st = surv_terms(state[k], tp);
        double ll = st.log_s;
        double a = 0.0, d = st.d_h0, dl = st.d_lc;
        if (data_.individual[r].event) {
            const double hc = st.h0 * st.q;
            const double h = hc + (additive ? tp.bg_rate : 0.0);
            if (!(h > 0.0)) {
                ll = kNegInf;
                failed = true;
            } else {
                ll += std::log(h);
                const double w = hc / h;
                a += w;
                if (cure) {
                    d += w * (st.q - 1.0);
                    dl += w * (-pc - pc_1mpc * (1.0 - st.s0) / st.sc);
                }
            }
        }
        if (pointwise) (*pointwise)[static_cast<Eigen::Index>(r)] = ll;
        total += ll;
        if (grad && !failed) push_grad(k, tp, a, d, dl, st);
    }

    const std::size_t n_ind = data_.individual.size();
    for (std::size_t j = 0; j < data_.external.size(); ++j) {
        const auto& row = data_.external[j];
        const std::size_t k = ext_pattern_[j];
        const auto su = surv_terms(state[k], ext_start_[j]);
        const auto sv = surv_terms(state[k], ext_stop_[j]);
        const double d_h0 = std::max(0.0, state[k].eta * (sv.isum - su.isum));
        const double log_p =
            log_conditional_survival(d_h0, cure, su.q, ext_stop_[j].bg_cum - ext_start_[j].bg_cum);
        const double log_1mp = std::log(-std::expm1(log_p));
        const double fails = row.n - row.r;
        double ll = log_choose(row.n, row.r);
        if (row.r > 0.0) ll += row.r * log_p;
        if (fails > 0.0) ll += fails * log_1mp;
        if (!std::isfinite(ll)) {
            ll = kNegInf;
            failed = true;
        }
        if (pointwise) (*pointwise)[static_cast<Eigen::Index>(n_ind + j)] = ll;
        total += ll;
        if (grad && !failed) {
            const double c = row.r - (fails > 0.0 ? fails * std::exp(log_p - log_1mp) : 0.0);
            if (!cure) {
                push_grad(k, ext_stop_[j], 0.0, -c, 0.0, sv);
                push_grad(k, ext_start_[j], 0.0, c, 0.0, su);
            } else {
                // log P = log1p(-w), w = q_u (1 - exp(-dH0)), differentiated directly
                // so that the two plateau survivals never cancel.
                const double e = std::exp(-d_h0);
                const double w = -su.q * std::expm1(-d_h0);
                const double inv = 1.0 / (1.0 - w);
                const double dv = -su.q * e * inv;
                const double du = -(w * (su.q - 1.0) - su.q * e) * inv;
                const double dl = w * inv * (pc + su.d_lc);
                push_grad(k, ext_stop_[j], 0.0, c * dv, 0.0, sv);
                push_grad(k, ext_start_[j], 0.0, c * du, c * dl, su);
            }
        }
    }

    if (std::isnan(total)) {
        total = kNegInf;
        failed = true;
    }
    if (grad) {
        grad->setZero(theta.size());
        if (failed) return total;
        auto g = [&](std::size_t i) -> double& { return (*grad)[static_cast<Eigen::Index>(i)]; };
        const double sigma = hp.sigma;
        for (std::size_t k = 0; k < np; ++k) {
            const auto& x = patterns_[k].x;
            g(l.log_eta0) += g_lp[k];
            for (std::size_t c = 0; c < nc; ++c) g(l.beta + c) += g_lp[k] * x[c];
            const double* gl = &g_logit[k * m];
            for (std::size_t i = 1; i < m; ++i) {
                const double zi = theta[static_cast<Eigen::Index>(l.z + i - 1)];
                g(l.z + i - 1) += sigma * gl[i];
                g(l.log_sigma) += sigma * zi * gl[i];
                if (l.nonprop) {
                    for (std::size_t c = 0; c < nc; ++c) {
                        const std::size_t zidx = l.zeta + (i - 1) * nc + c;
                        const double zeta = theta[static_cast<Eigen::Index>(zidx)];
                        g(zidx) += hp.tau[c] * x[c] * gl[i];
                        g(l.log_tau + c) += hp.tau[c] * zeta * x[c] * gl[i];
                    }
                }
            }
        }
        if (cure) g(l.logit_cure) += g_lc;
    }
    return total;
}

double SurvivalModel::log_likelihood(const Eigen::VectorXd& theta) const {
    return accumulate(theta, nullptr, nullptr);
}

double SurvivalModel::log_posterior(const Eigen::VectorXd& theta) const {
    const double ll = accumulate(theta, nullptr, nullptr);
    if (ll == kNegInf) return kNegInf;
    return ll + log_prior(theta);
}

double SurvivalModel::log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    Eigen::VectorXd g_prior;
    const double ll = accumulate(theta, &grad, nullptr);
    const double lp = log_prior(theta, g_prior);
    if (ll == kNegInf || !std::isfinite(lp)) {
        grad.setZero(theta.size());
        return kNegInf;
    }
    grad += g_prior;
    return ll + lp;
}

Eigen::VectorXd SurvivalModel::pointwise_loglik(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd pw(static_cast<Eigen::Index>(n_observations()));
    accumulate(theta, nullptr, &pw);
    return pw;
}

Eigen::VectorXd SurvivalModel::prior_centre() const {
    const auto& l = layout_;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.dim));
    c[static_cast<Eigen::Index>(l.log_eta0)] = priors_.log_eta0.location;
    c[static_cast<Eigen::Index>(l.log_sigma)] = std::log(priors_.sigma.shape / priors_.sigma.rate);
    for (std::size_t i = 0; i < l.n_cov; ++i) c[static_cast<Eigen::Index>(l.beta + i)] = priors_.loghr_for(i).location;
    if (l.nonprop)
        for (std::size_t i = 0; i < l.n_cov; ++i) {
            const auto pr = priors_.tau_for(i);
            c[static_cast<Eigen::Index>(l.log_tau + i)] = std::log(pr.shape / pr.rate);
        }
    if (l.cure) c[static_cast<Eigen::Index>(l.logit_cure)] = logit(priors_.cure.a / (priors_.cure.a + priors_.cure.b));
    return c;
}

Eigen::VectorXd SurvivalModel::prior_draw(std::mt19937_64& rng) const {
    const auto& l = layout_;
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    Eigen::VectorXd th(static_cast<Eigen::Index>(l.dim));
    auto set = [&](std::size_t i, double v) { th[static_cast<Eigen::Index>(i)] = v; };
    set(l.log_eta0, priors_.log_eta0.location + priors_.log_eta0.scale * stdnorm(rng));
    for (std::size_t i = 0; i + 1 < l.n_basis; ++i) set(l.z + i, draw_logistic(rng));
    set(l.log_sigma, std::log(draw_gamma(rng, priors_.sigma.shape, priors_.sigma.rate)));
    for (std::size_t c = 0; c < l.n_cov; ++c) {
        const auto pr = priors_.loghr_for(c);
        set(l.beta + c, pr.location + pr.scale * stdnorm(rng));
    }
    if (l.nonprop) {
        for (std::size_t i = 0; i < (l.n_basis - 1) * l.n_cov; ++i) set(l.zeta + i, stdnorm(rng));
        for (std::size_t c = 0; c < l.n_cov; ++c) {
            const auto pr = priors_.tau_for(c);
            set(l.log_tau + c, std::log(draw_gamma(rng, pr.shape, pr.rate)));
        }
    }
    if (l.cure) {
        const double ga = draw_gamma(rng, priors_.cure.a, 1.0);
        const double gb = draw_gamma(rng, priors_.cure.b, 1.0);
        set(l.logit_cure, std::log(ga) - std::log(gb));
    }
    // Guard against underflowed gamma draws.
    for (Eigen::Index i = 0; i < th.size(); ++i)
        if (!std::isfinite(th[i])) th[i] = prior_centre()[i];
    return th;
}

Eigen::VectorXd SurvivalModel::initial_point(std::mt19937_64& rng) const {
    const Eigen::VectorXd c = prior_centre();
    return c + 0.1 * (prior_draw(rng) - c);
}

}  // namespace hazspline
