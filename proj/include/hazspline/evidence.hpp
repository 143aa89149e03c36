#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hazspline/hazard.hpp"
#include "hazspline/mspline.hpp"

namespace hazspline {

struct IndividualRecord {
    double time = 0.0;
    bool event = false;
    CovariateVector x;
};

/// Out of n alive at `start`, r are still alive at `stop`. Counts are real so
/// that elicited Beta(a, b) judgements keep their exact weight.
struct ExternalRow {
    double start = 0.0;
    double stop = 0.0;
    double n = 0.0;
    double r = 0.0;
    CovariateVector x;

    void validate() const;
};

struct Dataset {
    std::vector<std::string> covariates;
    std::vector<IndividualRecord> individual;
    std::vector<ExternalRow> external;

    [[nodiscard]] std::vector<double> event_times() const;
    [[nodiscard]] std::size_t n_observations() const { return individual.size() + external.size(); }
};

/// Beta(a, b) judgement about survival over (u, v) as r = a survivors of n = a + b.
ExternalRow elicitation_to_external(double a, double b, double u, double v, CovariateVector x = {});

struct NormalPrior {
    double location = 0.0;
    double scale = 1.0;
};
struct GammaPrior {
    double shape = 2.0;
    double rate = 1.0;
};
struct BetaPrior {
    double a = 1.0;
    double b = 1.0;
};

struct PriorConfig {
    NormalPrior log_eta0{0.0, 20.0};
    std::vector<NormalPrior> loghr;  ///< one per covariate, or a single entry shared by all
    GammaPrior sigma{2.0, 1.0};
    std::vector<GammaPrior> tau;     ///< one per covariate, or a single entry shared by all
    BetaPrior cure{1.0, 1.0};

    [[nodiscard]] NormalPrior loghr_for(std::size_t c) const;
    [[nodiscard]] GammaPrior tau_for(std::size_t c) const;
    void validate() const;
};

/// Model structure shared by fitting and prediction.
struct ModelSpec {
    MSplineBasis basis;
    MechanismConfig mech;
    std::vector<std::string> covariates;
    bool nonprop = false;

    [[nodiscard]] std::size_t n_basis() const { return basis.size(); }
    [[nodiscard]] std::size_t n_cov() const { return covariates.size(); }
};

/// Positions of each block in the unconstrained parameter vector:
/// log eta0, spline logit innovations z_2..z_n, log sigma, beta,
/// non-proportionality innovations (row-major over basis terms 2..n),
/// log tau, logit cure probability.
struct ParameterLayout {
    std::size_t n_basis = 0;
    std::size_t n_cov = 0;
    bool nonprop = false;
    bool cure = false;

    std::size_t log_eta0 = 0;
    std::size_t z = 0;
    std::size_t log_sigma = 0;
    std::size_t beta = 0;
    std::size_t zeta = 0;
    std::size_t log_tau = 0;
    std::size_t logit_cure = 0;
    std::size_t dim = 0;
    std::size_t constrained_dim = 0;

    static ParameterLayout make(const ModelSpec& spec);
    [[nodiscard]] std::vector<std::string> constrained_names(const std::vector<std::string>& covariates) const;
};

/// Prior mean of the spline logits: log(p_i / p_1) for the constant-hazard simplex.
std::vector<double> constant_hazard_logits(const MSplineBasis& basis);

/// Rebuild hazard parameters from one row of constrained draws
/// (eta0, p_1..p_n, sigma, beta, delta, tau, cure_p).
HazardParams params_from_constrained(const ModelSpec& spec, std::span<const double> row);

/// Inverse of params_from_constrained.
std::vector<double> constrained_from_params(const ModelSpec& spec, const HazardParams& params);

struct LogLik {
    double total = 0.0;
    std::vector<double> pointwise;
};

/// event * log h(t) + log S(t) per record.
LogLik loglik_individual(std::span<const IndividualRecord> records, const HazardParams& params,
                         const MSplineBasis& basis, const MechanismConfig& mech);

/// Binomial log density of r survivors out of n with probability S(stop)/S(start).
LogLik loglik_external(std::span<const ExternalRow> rows, const HazardParams& params,
                       const MSplineBasis& basis, const MechanismConfig& mech);

/// Prior density of the constrained parameters, with no change-of-variable terms.
double log_prior_constrained(const ModelSpec& spec, const HazardParams& params, const PriorConfig& priors);

/// Joint posterior over the unconstrained parameter vector.
///
/// Spline logits are parameterised as gamma_i = mu_i + sigma z_i with
/// z_i ~ Logistic(0, 1), and non-proportionality effects as
/// delta_is = tau_s zeta_is with zeta_is ~ Normal(0, 1). This is the same
/// prior as Logistic(mu_i, sigma) and Normal(0, tau_s) on gamma and delta.
class SurvivalModel {
public:
    SurvivalModel(ModelSpec spec, Dataset data, PriorConfig priors);

    [[nodiscard]] std::size_t dim() const noexcept { return layout_.dim; }
    [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Dataset& data() const noexcept { return data_; }
    [[nodiscard]] const PriorConfig& priors() const noexcept { return priors_; }
    [[nodiscard]] const std::vector<double>& mu() const noexcept { return mu_; }
    [[nodiscard]] std::size_t n_observations() const noexcept { return data_.n_observations(); }

    [[nodiscard]] HazardParams to_params(const Eigen::VectorXd& theta) const;
    [[nodiscard]] Eigen::VectorXd to_constrained(const Eigen::VectorXd& theta) const;
    [[nodiscard]] Eigen::VectorXd from_params(const HazardParams& params) const;

    [[nodiscard]] double log_prior(const Eigen::VectorXd& theta) const;
    [[nodiscard]] double log_prior(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
    [[nodiscard]] double log_likelihood(const Eigen::VectorXd& theta) const;
    [[nodiscard]] double log_posterior(const Eigen::VectorXd& theta) const;
    /// Value and gradient; grad is resized as needed.
    double log_posterior(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
    /// Individual records first, then external rows.
    [[nodiscard]] Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& theta) const;

    [[nodiscard]] Eigen::VectorXd prior_draw(std::mt19937_64& rng) const;
    /// Prior draw shrunk 90% toward the prior centre.
    [[nodiscard]] Eigen::VectorXd initial_point(std::mt19937_64& rng) const;
    [[nodiscard]] Eigen::VectorXd prior_centre() const;

private:
    struct Pattern {
        std::vector<double> x;
    };
    struct TimePoint {
        std::vector<double> b;
        std::vector<double> ib;
        double bg_rate = 0.0;
        double bg_cum = 0.0;
    };
    struct PatternState {
        double eta = 0.0;
        std::vector<double> p;
    };

    double accumulate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::VectorXd* pointwise) const;
    std::size_t pattern_index(const std::vector<double>& x);
    TimePoint precompute(double t) const;

    ModelSpec spec_;
    Dataset data_;
    PriorConfig priors_;
    ParameterLayout layout_;
    std::vector<double> mu_;
    std::vector<Pattern> patterns_;
    std::vector<std::size_t> ind_pattern_;
    std::vector<TimePoint> ind_points_;
    std::vector<std::size_t> ext_pattern_;
    std::vector<TimePoint> ext_start_;
    std::vector<TimePoint> ext_stop_;
};

}  // namespace hazspline
