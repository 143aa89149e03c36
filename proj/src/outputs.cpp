#include "hazspline/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "hazspline/stats.hpp"

namespace hazspline {

namespace {

constexpr int kGaussOrder = 10;

// Gauss-Legendre nodes and weights mapped to [a, b].
void gauss_panel(double a, double b, std::vector<double>& nodes, std::vector<double>& weights) {
    using G = boost::math::quadrature::gauss<double, kGaussOrder>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        nodes.push_back(mid - half * x[i]);
        weights.push_back(half * w[i]);
        if (x[i] != 0.0) {
            nodes.push_back(mid + half * x[i]);
            weights.push_back(half * w[i]);
        }
    }
}

// Points in (a, b) where the hazard may be non-smooth.
std::vector<double> kinks(const ModelSpec& spec, double a, double b, const std::optional<WaningConfig>& waning) {
    std::vector<double> pts;
    auto add = [&](double t) {
        if (t > a && t < b) pts.push_back(t);
    };
    for (double t : spec.basis.breakpoints()) add(t);
    add(spec.basis.upper());
    if (spec.mech.additive && spec.mech.background)
        for (double t : spec.mech.background->breakpoints()) add(t);
    if (waning) {
        add(waning->t_min);
        add(waning->t_max);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace

void WaningConfig::validate() const {
    if (!(t_min >= 0.0)) throw std::invalid_argument("waning t_min must be non-negative");
    if (!(t_max > t_min)) throw std::invalid_argument("waning t_max must exceed t_min");
}

Predictor::Predictor(ModelSpec spec, const Eigen::MatrixXd& constrained_draws) : spec_(std::move(spec)) {
    if (constrained_draws.rows() == 0) throw std::invalid_argument("no posterior draws");
    params_.reserve(static_cast<std::size_t>(constrained_draws.rows()));
    std::vector<double> row(static_cast<std::size_t>(constrained_draws.cols()));
    for (Eigen::Index i = 0; i < constrained_draws.rows(); ++i) {
        for (Eigen::Index j = 0; j < constrained_draws.cols(); ++j) row[static_cast<std::size_t>(j)] = constrained_draws(i, j);
        params_.push_back(params_from_constrained(spec_, row));
    }
}

double waning_hazard_ratio(double hr_at_tmin, double hr_model_at_t, const WaningConfig& w, double t) {
    if (t <= w.t_min) return hr_model_at_t;
    if (t >= w.t_max) return 1.0;
    return std::exp(std::log(hr_at_tmin) * (w.t_max - t) / (w.t_max - w.t_min));
}

CurveEngine::CurveEngine(const ModelSpec& spec, std::vector<double> times, std::optional<WaningConfig> waning)
    : spec_(&spec), times_(std::move(times)), waning_(std::move(waning)) {
    for (double t : times_) {
        if (!(t >= 0.0)) throw std::domain_error("curve times must be non-negative");
        nodes_.push_back(make_node(t));
    }
    if (!waning_) return;
    waning_->validate();
    const double a = waning_->t_min, b = waning_->t_max;
    anchors_ = {make_node(a), make_node(b)};
    window_pts_ = kinks(spec, a, b, std::nullopt);
    for (double t : times_)
        if (t > a && t < b) window_pts_.push_back(t);
    window_pts_.push_back(b);
    std::sort(window_pts_.begin(), window_pts_.end());
    window_pts_.erase(std::unique(window_pts_.begin(), window_pts_.end()), window_pts_.end());
    double lo = a;
    for (double hi : window_pts_) {
        std::vector<double> nodes;
        gauss_panel(lo, hi, nodes, inner_w_);
        for (double t : nodes) inner_.push_back(make_node(t));
        inner_per_ = nodes.size();
        lo = hi;
    }
}

CurveEngine::Node CurveEngine::make_node(double t) const {
    return {t, spec_->basis.eval(t), spec_->basis.eval_cumulative(t)};
}

void CurveEngine::values(const HazardParams& params, std::span<const double> x, std::span<const Node> nodes,
                         std::vector<double>& h, std::vector<double>& cum) const {
    const auto coef = coefficients_for(params, spec_->basis, x);
    const double eta = scale_for(params, x);
    h.resize(nodes.size());
    cum.resize(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const auto pt = combine_hazard(eta, coef, nodes[j].b, nodes[j].ib, spec_->mech, params.cure_p, nodes[j].t);
        h[j] = pt.hazard;
        cum[j] = pt.cumhaz;
    }
}

CurveValues CurveEngine::evaluate(const HazardParams& params, std::span<const double> x) const {
    CurveValues out;
    std::vector<double> cum1;
    values(params, x, nodes_, out.hazard, cum1);
    out.survival.resize(cum1.size());
    if (!waning_) {
        for (std::size_t j = 0; j < cum1.size(); ++j) out.survival[j] = std::exp(-cum1[j]);
        return out;
    }
    const auto& x0 = waning_->reference;
    const double tmin = waning_->t_min, tmax = waning_->t_max;
    std::vector<double> ha1, ca1, ha0, ca0, h0, c0, hi0, ci0;
    values(params, x, anchors_, ha1, ca1);
    values(params, x0, anchors_, ha0, ca0);
    values(params, x0, nodes_, h0, c0);
    values(params, x0, inner_, hi0, ci0);
    const double hr_min = ha0[0] > 0.0 ? ha1[0] / ha0[0] : 1.0;
    auto hr = [&](double t) { return waning_hazard_ratio(hr_min, 1.0, *waning_, t); };

    // Waned cumulative hazard accumulated over the window, at each window point.
    std::vector<double> window_cum(window_pts_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < window_pts_.size(); ++k) {
        for (std::size_t q = k * inner_per_; q < (k + 1) * inner_per_; ++q) acc += inner_w_[q] * hi0[q] * hr(inner_[q].t);
        window_cum[k] = acc;
    }
    const double cum_at_min = ca1[0];
    const double cum_window = window_cum.back();
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        const double t = nodes_[j].t;
        if (t <= tmin) {
            out.survival[j] = std::exp(-cum1[j]);
        } else if (t < tmax) {
            const auto it = std::lower_bound(window_pts_.begin(), window_pts_.end(), t);
            const double cw = window_cum[static_cast<std::size_t>(it - window_pts_.begin())];
            out.hazard[j] = h0[j] * hr(t);
            out.survival[j] = std::exp(-(cum_at_min + cw));
        } else {
            out.hazard[j] = h0[j];
            out.survival[j] = std::exp(-(cum_at_min + cum_window + (c0[j] - ca0[1])));
        }
    }
    return out;
}

SummaryRow summarise_values(std::string quantity, std::string label, double t, std::vector<double> values,
                            double level) {
    if (values.empty()) throw std::invalid_argument("no draws to summarise");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credibility level must be in (0, 1)");
    std::sort(values.begin(), values.end());
    SummaryRow row;
    row.quantity = std::move(quantity);
    row.label = std::move(label);
    row.t = t;
    row.median = quantile_sorted(values, 0.5);
    row.lower = quantile_sorted(values, 0.5 * (1.0 - level));
    row.upper = quantile_sorted(values, 0.5 * (1.0 + level));
    row.level = level;
    return row;
}

SummaryTable curve_summary(const Predictor& pred, Quantity quantity, const std::vector<double>& times,
                           const CovariatePattern& pattern, double level,
                           const std::optional<WaningConfig>& waning) {
    const CurveEngine engine(pred.spec(), times, waning);
    std::vector<std::vector<double>> per_time(times.size(), std::vector<double>(pred.size()));
    for (std::size_t d = 0; d < pred.size(); ++d) {
        const auto cv = engine.evaluate(pred.draw(d), pattern.x);
        const auto& v = quantity == Quantity::survival ? cv.survival : cv.hazard;
        for (std::size_t j = 0; j < times.size(); ++j) per_time[j][d] = v[j];
    }
    SummaryTable table;
    const char* name = quantity == Quantity::survival ? "survival" : "hazard";
    for (std::size_t j = 0; j < times.size(); ++j)
        table.push_back(summarise_values(name, pattern.label, times[j], std::move(per_time[j]), level));
    return table;
}

Quadrature rmst_quadrature(const ModelSpec& spec, double horizon, const std::optional<WaningConfig>& waning) {
    if (!(horizon > 0.0)) throw std::invalid_argument("RMST horizon must be positive");
    std::vector<double> cuts{0.0};
    for (double t : kinks(spec, 0.0, horizon, waning)) cuts.push_back(t);
    cuts.push_back(horizon);
    // Long smooth stretches still get several panels.
    const double max_width = std::max(horizon, spec.basis.upper()) / 32.0;
    Quadrature q;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double width = cuts[i + 1] - cuts[i];
        const auto pieces = static_cast<std::size_t>(std::ceil(width / max_width));
        for (std::size_t k = 0; k < pieces; ++k) {
            const double a = cuts[i] + width * static_cast<double>(k) / static_cast<double>(pieces);
            const double b = cuts[i] + width * static_cast<double>(k + 1) / static_cast<double>(pieces);
            gauss_panel(a, b, q.nodes, q.weights);
        }
    }
    return q;
}

std::vector<double> rmst_draws(const Predictor& pred, double horizon, std::span<const double> x,
                               const std::optional<WaningConfig>& waning) {
    const auto quad = rmst_quadrature(pred.spec(), horizon, waning);
    const CurveEngine engine(pred.spec(), quad.nodes, waning);
    std::vector<double> out(pred.size());
    for (std::size_t d = 0; d < pred.size(); ++d) {
        const auto cv = engine.evaluate(pred.draw(d), x);
        double s = 0.0;
        for (std::size_t j = 0; j < quad.weights.size(); ++j) s += quad.weights[j] * cv.survival[j];
        out[d] = s;
    }
    return out;
}

SummaryTable rmst(const Predictor& pred, double horizon, const CovariatePattern& pattern, double level,
                  const std::optional<WaningConfig>& waning) {
    return {summarise_values("rmst", pattern.label, horizon, rmst_draws(pred, horizon, pattern.x, waning), level)};
}

SummaryTable irmst(const Predictor& pred, double horizon, const CovariatePattern& treated,
                   const CovariatePattern& control, double level, std::optional<WaningConfig> waning) {
    if (waning) waning->reference = control.x;
    auto a = rmst_draws(pred, horizon, treated.x, waning);
    const auto b = rmst_draws(pred, horizon, control.x);
    for (std::size_t d = 0; d < a.size(); ++d) a[d] -= b[d];
    return {summarise_values("irmst", treated.label + " - " + control.label, horizon, std::move(a), level)};
}

MedianSurvival median_survival(const Predictor& pred, const CovariatePattern& pattern, double level) {
    const auto& spec = pred.spec();
    MedianSurvival out;
    out.bracket_end = 100.0 * spec.basis.upper();
    const double target = std::log(2.0);
    for (std::size_t d = 0; d < pred.size(); ++d) {
        const auto& hp = pred.draw(d);
        auto cum = [&](double t) { return cumulative_hazard(hp, spec.basis, spec.mech, pattern.x, t); };
        double lo = 0.0, hi = out.bracket_end;
        if (cum(hi) < target) {
            ++out.unreachable;
            out.per_draw.push_back(hi);
            continue;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cum(mid) < target ? lo : hi) = mid;
        }
        out.per_draw.push_back(0.5 * (lo + hi));
    }
    out.table = {summarise_values("median_survival", pattern.label, 0.5, out.per_draw, level)};
    return out;
}

}  // namespace hazspline
