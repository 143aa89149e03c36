#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hazspline/evidence.hpp"

namespace hazspline {

struct CovariatePattern {
    std::string label;
    CovariateVector x;
};

/// Log hazard ratio against `reference` shrinks linearly to 0 between t_min and t_max.
struct WaningConfig {
    double t_min = 0.0;
    double t_max = 0.0;
    CovariateVector reference;

    void validate() const;
};

struct SummaryRow {
    std::string quantity;
    std::string label;
    double t = 0.0;
    double median = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
};

using SummaryTable = std::vector<SummaryRow>;

/// Posterior draws rebuilt as hazard parameters.
class Predictor {
public:
    Predictor(ModelSpec spec, const Eigen::MatrixXd& constrained_draws);

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] const HazardParams& draw(std::size_t i) const { return params_[i]; }
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }

private:
    ModelSpec spec_;
    std::vector<HazardParams> params_;
};

/// hr(t) under waning: the model ratio up to t_min, 1 from t_max, and log-linear between.
double waning_hazard_ratio(double hr_at_tmin, double hr_model_at_t, const WaningConfig& w, double t);

struct CurveValues {
    std::vector<double> hazard;
    std::vector<double> survival;
};

/// Hazard and survival for one draw at fixed times, with basis values cached
/// across draws. With waning, the curve for x is the reference hazard times the
/// waned hazard ratio after t_min.
class CurveEngine {
public:
    CurveEngine(const ModelSpec& spec, std::vector<double> times, std::optional<WaningConfig> waning = std::nullopt);

    [[nodiscard]] CurveValues evaluate(const HazardParams& params, std::span<const double> x) const;
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }

private:
    struct Node {
        double t;
        std::vector<double> b, ib;
    };
    Node make_node(double t) const;
    void values(const HazardParams& params, std::span<const double> x, std::span<const Node> nodes,
                std::vector<double>& h, std::vector<double>& cum) const;

    const ModelSpec* spec_;
    std::vector<double> times_;
    std::vector<Node> nodes_;
    std::optional<WaningConfig> waning_;
    std::vector<Node> anchors_;       // t_min, t_max
    std::vector<double> window_pts_;  // sorted points in (t_min, t_max]
    std::vector<Node> inner_;         // quadrature nodes, grouped by window interval
    std::vector<double> inner_w_;
    std::size_t inner_per_ = 0;
};

enum class Quantity { survival, hazard };

SummaryTable curve_summary(const Predictor& pred, Quantity quantity, const std::vector<double>& times,
                           const CovariatePattern& pattern, double level = 0.95,
                           const std::optional<WaningConfig>& waning = std::nullopt);

/// Quadrature nodes and weights for integrating survival over [0, horizon], with
/// panels split where the hazard is not smooth.
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
Quadrature rmst_quadrature(const ModelSpec& spec, double horizon, const std::optional<WaningConfig>& waning);

std::vector<double> rmst_draws(const Predictor& pred, double horizon, std::span<const double> x,
                               const std::optional<WaningConfig>& waning = std::nullopt);

SummaryTable rmst(const Predictor& pred, double horizon, const CovariatePattern& pattern, double level = 0.95,
                  const std::optional<WaningConfig>& waning = std::nullopt);

/// RMST(x1) - RMST(x0) within each draw. With waning, x1's curve wanes toward x0.
SummaryTable irmst(const Predictor& pred, double horizon, const CovariatePattern& treated,
                   const CovariatePattern& control, double level = 0.95,
                   std::optional<WaningConfig> waning = std::nullopt);

struct MedianSurvival {
    SummaryTable table;
    std::vector<double> per_draw;
    std::size_t unreachable = 0;  ///< draws whose survival stays above 0.5 up to 100 U
    double bracket_end = 0.0;
};

MedianSurvival median_survival(const Predictor& pred, const CovariatePattern& pattern, double level = 0.95);

/// Median and equal-tailed interval of per-draw values.
SummaryRow summarise_values(std::string quantity, std::string label, double t, std::vector<double> values,
                            double level);

}  // namespace hazspline
