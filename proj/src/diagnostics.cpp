#include "hazspline/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hazspline/stats.hpp"

namespace hazspline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (static_cast<double>(v.size()) - 1.0);
}

ChainValues split_chains(const ChainValues& chains) {
    ChainValues out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        if (half < 2) continue;
        // Drop the middle draw of odd-length chains.
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

// Biased autocovariance (divide by n) at one lag.
double autocovariance(const std::vector<double>& x, double mean, std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(x.size());
}

}  // namespace

double split_rhat(const ChainValues& chains) {
    const auto split = split_chains(chains);
    if (split.size() < 2) return kNaN;
    const double n = static_cast<double>(split.front().size());
    std::vector<double> means, vars;
    for (const auto& c : split) {
        means.push_back(mean_of(c));
        vars.push_back(var_of(c));
    }
    const double w = mean_of(vars);
    const double b = n * var_of(means);
    if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

double effective_sample_size(const ChainValues& chains) {
    const auto split = split_chains(chains);
    if (split.empty()) return kNaN;
    const std::size_t m = split.size();
    const std::size_t n = split.front().size();
    std::vector<double> means, vars;
    for (const auto& c : split) {
        means.push_back(mean_of(c));
        vars.push_back(var_of(c));
    }
    const double w = mean_of(vars);
    double var_plus = w * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
    if (m > 1) var_plus += var_of(means);
    if (!(var_plus > 0.0)) return static_cast<double>(m * n);

    // Lags are computed on demand; the sequence usually stops early.
    auto rho = [&](std::size_t lag) {
        if (lag == 0) return 1.0;
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += autocovariance(split[c], means[c], lag);
        return 1.0 - (w - s / static_cast<double>(m)) / var_plus;
    };
    // Geyer: sum consecutive pairs while positive, forcing them monotone.
    std::vector<double> pairs;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double p = rho(t) + rho(t + 1);
        if (!(p > 0.0)) break;
        p = std::min(p, prev);
        pairs.push_back(p);
        prev = p;
    }
    double tau = -1.0;
    for (double p : pairs) tau += 2.0 * p;
    // Antithetic chains can give tau < 1; ESS is capped at the number of draws.
    tau = std::max(tau, 1.0);
    return static_cast<double>(m * n) / tau;
}

double Diagnostics::max_rhat() const {
    double r = 0.0;
    for (const auto& p : parameters)
        if (std::isfinite(p.rhat)) r = std::max(r, p.rhat);
    return r;
}

double Diagnostics::min_ess() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& p : parameters)
        if (std::isfinite(p.ess)) e = std::min(e, p.ess);
    return e;
}

Diagnostics diagnose(const PosteriorDraws& draws) {
    Diagnostics d;
    const std::size_t nc = draws.n_chains;
    if (nc < 2) d.warnings.emplace_back("single chain: R-hat omitted");
    for (Eigen::Index j = 0; j < draws.draws.cols(); ++j) {
        ChainValues chains(nc);
        std::vector<double> all;
        for (Eigen::Index i = 0; i < draws.draws.rows(); ++i) {
            const double v = draws.draws(i, j);
            chains[static_cast<std::size_t>(draws.chain[static_cast<std::size_t>(i)])].push_back(v);
            all.push_back(v);
        }
        ParameterSummary s;
        s.name = draws.names[static_cast<std::size_t>(j)];
        s.mean = mean_of(all);
        s.sd = all.size() > 1 ? std::sqrt(var_of(all)) : 0.0;
        std::sort(all.begin(), all.end());
        s.q025 = quantile_sorted(all, 0.025);
        s.median = quantile_sorted(all, 0.5);
        s.q975 = quantile_sorted(all, 0.975);
        // A constant column (the first simplex weight can be fixed) has no spread to diagnose.
        if (s.sd == 0.0) {
            s.rhat = nc < 2 ? kNaN : 1.0;
            s.ess = static_cast<double>(all.size());
        } else {
            s.rhat = nc < 2 ? kNaN : split_rhat(chains);
            s.ess = effective_sample_size(chains);
        }
        d.parameters.push_back(s);
    }
    for (const auto& st : draws.stats) d.divergences += st.divergences;
    d.divergence_rate = draws.size() > 0 ? static_cast<double>(d.divergences) / static_cast<double>(draws.size()) : 0.0;
    d.warnings.insert(d.warnings.end(), draws.warnings.begin(), draws.warnings.end());
    if (nc >= 2 && d.max_rhat() > 1.05) d.warnings.emplace_back("some R-hat values exceed 1.05");
    return d;
}

}  // namespace hazspline
