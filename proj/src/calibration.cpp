#include "hazspline/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>

#include "hazspline/stats.hpp"

namespace hazspline {

namespace {

double draw_logistic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0 || u >= 1.0) u = unif(rng);
    return std::log(u) - std::log1p(-u);
}

// Basis values on an equally spaced grid over [0, U], one row per grid point.
Eigen::MatrixXd grid_basis(const MSplineBasis& basis, std::size_t grid_size) {
    if (grid_size < 2) throw std::invalid_argument("rho grid needs at least two points");
    Eigen::MatrixXd g(static_cast<Eigen::Index>(grid_size), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < grid_size; ++j) {
        const double t = basis.upper() * static_cast<double>(j) / static_cast<double>(grid_size - 1);
        const auto b = basis.eval(t);
        for (std::size_t i = 0; i < b.size(); ++i) g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = b[i];
    }
    return g;
}

double rho_of(const Eigen::MatrixXd& g, const std::vector<double>& mu, double sigma, const double* z,
              double eta, Eigen::VectorXd& p, std::vector<double>& h) {
    const std::size_t m = mu.size();
    double mx = 0.0;
    p[0] = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        p[static_cast<Eigen::Index>(i)] = mu[i] + sigma * z[i - 1];
        mx = std::max(mx, p[static_cast<Eigen::Index>(i)]);
    }
    p = (p.array() - mx).exp();
    p /= p.sum();
    const Eigen::VectorXd hv = eta * (g * p);
    h.assign(hv.data(), hv.data() + hv.size());
    std::sort(h.begin(), h.end());
    const double lo = quantile_sorted(h, 0.1);
    const double hi = quantile_sorted(h, 0.9);
    return lo > 0.0 ? std::max(1.0, hi / lo) : std::numeric_limits<double>::infinity();
}

struct RhoSummary {
    double median, upper;
};

RhoSummary summarise(std::vector<double> rho) {
    std::sort(rho.begin(), rho.end());
    return {quantile_sorted(rho, 0.5), quantile_sorted(rho, 0.975)};
}

// Common random numbers for calibration: gamma quantile levels and logistic innovations.
struct Crn {
    std::vector<double> u;
    std::vector<std::vector<double>> z;
};

}  // namespace

std::vector<double> rho_from_innovations(const MSplineBasis& basis, const std::vector<double>& sigma,
                                         const std::vector<std::vector<double>>& innovations, std::size_t grid_size) {
    const auto g = grid_basis(basis, grid_size);
    const auto mu = constant_hazard_logits(basis);
    Eigen::VectorXd p(static_cast<Eigen::Index>(mu.size()));
    std::vector<double> h;
    std::vector<double> out(sigma.size());
    for (std::size_t s = 0; s < sigma.size(); ++s) out[s] = rho_of(g, mu, sigma[s], innovations[s].data(), 1.0, p, h);
    return out;
}

std::vector<double> simulate_prior_rho(const MSplineBasis& basis, const PriorConfig& priors, std::size_t n_sims,
                                       std::size_t grid_size, std::mt19937_64& rng) {
    const auto g = grid_basis(basis, grid_size);
    const auto mu = constant_hazard_logits(basis);
    std::gamma_distribution<double> gamma(priors.sigma.shape, 1.0 / priors.sigma.rate);
    std::normal_distribution<double> normal(priors.log_eta0.location, priors.log_eta0.scale);
    Eigen::VectorXd p(static_cast<Eigen::Index>(mu.size()));
    std::vector<double> h, z(mu.size() - 1), out(n_sims);
    for (std::size_t s = 0; s < n_sims; ++s) {
        const double sigma = gamma(rng);
        for (double& v : z) v = draw_logistic(rng);
        const double eta = std::exp(normal(rng));
        out[s] = rho_of(g, mu, sigma, z.data(), eta, p, h);
        // The ratio does not depend on eta, except through underflow at extreme draws.
        if (!std::isfinite(out[s])) out[s] = rho_of(g, mu, sigma, z.data(), 1.0, p, h);
    }
    return out;
}

SigmaCalibration calibrate_sigma_prior(double target_median, double target_upper, const MSplineBasis& basis,
                                       std::size_t n_sims, std::size_t grid_size, std::uint64_t seed) {
    if (!(target_median > 1.0) || !(target_upper > target_median))
        throw std::invalid_argument("rho targets must satisfy 1 < median < upper");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto g = grid_basis(basis, grid_size);
    const auto mu = constant_hazard_logits(basis);
    Crn crn;
    crn.u.resize(n_sims);
    crn.z.assign(n_sims, std::vector<double>(mu.size() - 1));
    for (std::size_t s = 0; s < n_sims; ++s) {
        do crn.u[s] = unif(rng);
        while (crn.u[s] <= 0.0);
        for (double& v : crn.z[s]) v = draw_logistic(rng);
    }
    Eigen::VectorXd p(static_cast<Eigen::Index>(mu.size()));
    std::vector<double> h;
    std::vector<double> unit(n_sims);  // sigma draws at rate 1
    auto set_shape = [&](double shape) {
        boost::math::gamma_distribution<double> dist(shape, 1.0);
        for (std::size_t s = 0; s < n_sims; ++s) unit[s] = boost::math::quantile(dist, crn.u[s]);
    };
    auto eval = [&](double rate) {
        std::vector<double> rho(n_sims);
        for (std::size_t s = 0; s < n_sims; ++s) rho[s] = rho_of(g, mu, unit[s] / rate, crn.z[s].data(), 1.0, p, h);
        return summarise(std::move(rho));
    };
    // Median rho decreases in the rate; bisect on log rate.
    auto solve_rate = [&]() {
        double lo = std::log(1e-6), hi = std::log(1e8);
        for (int it = 0; it < 60 && hi - lo > 1e-5; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (eval(std::exp(mid)).median > target_median)
                lo = mid;
            else
                hi = mid;
        }
        return std::exp(0.5 * (lo + hi));
    };

    SigmaCalibration out;
    double shape = 2.0;
    set_shape(shape);
    double rate = solve_rate();
    auto res = eval(rate);
    const auto ok_median = [&](const RhoSummary& r) { return std::abs(r.median / target_median - 1.0) <= 0.10; };
    const auto ok_upper = [&](const RhoSummary& r) { return std::abs(r.upper / target_upper - 1.0) <= 0.25; };
    if (ok_median(res) && !ok_upper(res)) {
        // A smaller shape spreads sigma, lengthening the upper tail of rho.
        double lo = std::log(0.05), hi = std::log(200.0);
        double best_gap = std::abs(std::log(res.upper / target_upper));
        double best_shape = shape, best_rate = rate;
        for (int it = 0; it < 30 && hi - lo > 1e-3; ++it) {
            const double mid = 0.5 * (lo + hi);
            set_shape(std::exp(mid));
            const double r = solve_rate();
            const auto cand = eval(r);
            const double gap = std::abs(std::log(cand.upper / target_upper));
            if (ok_median(cand) && gap < best_gap) {
                best_gap = gap;
                best_shape = std::exp(mid);
                best_rate = r;
            }
            if (cand.upper > target_upper)
                lo = mid;
            else
                hi = mid;
        }
        shape = best_shape;
        rate = best_rate;
        set_shape(shape);
        res = eval(rate);
        out.note = "shape adjusted from 2 to match the upper target";
    }
    out.prior = {shape, rate};
    out.median_rho = res.median;
    out.upper_rho = res.upper;
    out.attained = ok_median(res) && ok_upper(res);
    if (!out.attained) out.note = "targets not attainable; closest prior reported";
    return out;
}

ScaleCalibration calibrate_scale_prior(double target_mean, double low, double high, const MSplineBasis& basis) {
    if (!(target_mean > 0.0) || !(low > 0.0) || !(low <= target_mean) || !(target_mean <= high))
        throw std::invalid_argument("scale calibration needs 0 < low <= target <= high");
    constexpr double z = 1.959963984540054;
    ScaleCalibration out;
    out.prior.location = std::log(basis.upper() / target_mean);
    const double down = std::log(target_mean / low);
    const double up = std::log(high / target_mean);
    out.prior.scale = std::max(down, up) / z;
    out.low = target_mean * std::exp(-z * out.prior.scale);
    out.high = target_mean * std::exp(z * out.prior.scale);
    out.symmetric = std::abs(down - up) <= 1e-9 * std::max(1.0, std::max(down, up));
    if (!out.symmetric)
        out.note = "interval is not symmetric on the log scale; the implied interval is wider on one side";
    return out;
}

std::vector<double> simulate_prior_mean_survival(const MSplineBasis& basis, const PriorConfig& priors,
                                                 std::size_t n_sims, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(priors.log_eta0.location, priors.log_eta0.scale);
    std::vector<double> out(n_sims);
    for (auto& v : out) v = basis.upper() * std::exp(-normal(rng));
    return out;
}

}  // namespace hazspline
