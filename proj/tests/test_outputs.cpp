#include <doctest.h>

#include <cmath>
#include <random>

#include "hazspline/outputs.hpp"
#include "test_support.hpp"

using namespace hazspline;
using namespace hazspline::testing;

namespace {

ModelSpec make_spec(std::vector<std::string> covs = {}, bool cure = false, bool additive = false) {
    ModelSpec spec{reduce_smooth_boundary(MSplineBasis(KnotSet{{1.0, 2.5, 4.0}, 6.0, 4})), {}, std::move(covs), false};
    spec.mech.cure = cure;
    if (additive) {
        spec.mech.additive = true;
        spec.mech.background = BackgroundHazard({0.0, 3.0, 7.0}, {0.01, 0.03, 0.08});
    }
    return spec;
}

Eigen::MatrixXd rows_of(const ModelSpec& spec, const std::vector<HazardParams>& params) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(params.size()),
                      static_cast<Eigen::Index>(ParameterLayout::make(spec).constrained_dim));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto r = constrained_from_params(spec, params[i]);
        for (std::size_t j = 0; j < r.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
    }
    return m;
}

Predictor constant_predictor(double lambda, std::size_t n = 5) {
    const auto spec = make_spec();
    return Predictor(spec, rows_of(spec, std::vector<HazardParams>(n, constant_params(spec.basis, lambda))));
}

// Shrunk prior draws for a given model structure.
Predictor random_predictor(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
    Dataset empty;
    empty.covariates = spec.covariates;
    SurvivalModel model(spec, empty, PriorConfig{});
    std::mt19937_64 rng(seed);
    std::vector<HazardParams> ps;
    while (ps.size() < n) {
        auto hp = model.to_params(model.initial_point(rng));
        // Keep draws whose hazard is on a plausible scale for the horizons below.
        const double h = hazard(hp, spec.basis, MechanismConfig{}, std::vector<double>(spec.covariates.size(), 0.0), 2.0);
        if (h > 0.02 && h < 2.0) ps.push_back(hp);
    }
    return Predictor(spec, rows_of(spec, ps));
}

// Richardson-extrapolated trapezoid rule on a uniform grid of n intervals.
double trapezoid_rmst(const std::function<double(double)>& s, double horizon, int n = 10000) {
    auto trap = [&](int k) {
        const double h = horizon / k;
        double acc = 0.5 * (s(0.0) + s(horizon));
        for (int i = 1; i < k; ++i) acc += s(i * h);
        return acc * h;
    };
    return (4.0 * trap(2 * n) - trap(n)) / 3.0;
}

}  // namespace

TEST_CASE("curve summaries") {
    const auto pred = constant_predictor(0.5);
    const CovariatePattern all{"all", {}};
    const auto s = curve_summary(pred, Quantity::survival, {0.0, 2.0, 10.0}, all);
    CHECK(s[0].median == 1.0);
    CHECK(s[0].lower == 1.0);
    CHECK(s[0].upper == 1.0);
    CHECK(s[1].median == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(s[1].lower == s[1].median);
    CHECK(s[1].upper == s[1].median);
    CHECK(s[2].quantity == "survival");
    CHECK(s[2].label == "all");
    const auto h = curve_summary(pred, Quantity::hazard, {0.5, 8.0}, all);
    CHECK(h[0].median == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(h[1].median == doctest::Approx(0.5).epsilon(1e-10));
    CHECK_THROWS(curve_summary(pred, Quantity::survival, {-1.0}, all));

    SUBCASE("wider level gives a wider interval") {
        const auto spec = make_spec();
        const auto rp = random_predictor(spec, 400, 3);
        const auto a = curve_summary(rp, Quantity::survival, {3.0}, all, 0.8);
        const auto b = curve_summary(rp, Quantity::survival, {3.0}, all, 0.95);
        CHECK(b[0].upper - b[0].lower > a[0].upper - a[0].lower);
        CHECK(a[0].lower <= a[0].median);
        CHECK(a[0].median <= a[0].upper);
        for (const auto& row : curve_summary(rp, Quantity::survival, {0.0, 1.0, 5.0, 30.0}, all)) {
            CHECK(row.lower >= 0.0);
            CHECK(row.upper <= 1.0);
        }
    }
}

TEST_CASE("RMST under a constant hazard") {
    const auto pred = constant_predictor(0.5);
    const CovariatePattern all{"all", {}};
    CHECK(rmst(pred, 2.0, all)[0].median == doctest::Approx(1.26424112).epsilon(1e-8));
    CHECK(std::abs(rmst(pred, 2.0, all)[0].median - 1.26424112) < 1e-6);
    CHECK(rmst(pred, 1e-8, all)[0].median == doctest::Approx(1e-8).epsilon(1e-6));
    CHECK(rmst(pred, 40.0, all)[0].median == doctest::Approx((1 - std::exp(-20.0)) / 0.5).epsilon(1e-10));
    CHECK_THROWS(rmst(pred, 0.0, all));
    CHECK_THROWS(rmst(pred, -1.0, all));
}

TEST_CASE("RMST quadrature against a trapezoid oracle") {
    const std::vector<double> x{1.0};
    for (bool cure : {false, true})
        for (bool additive : {false, true}) {
            const auto spec = make_spec({"trt"}, cure, additive);
            const auto pred = random_predictor(spec, 5, 10 + 2 * cure + additive);
            for (double horizon : {3.3, 6.0, 15.0}) {
                const auto r = rmst_draws(pred, horizon, x);
                for (std::size_t d = 0; d < pred.size(); ++d) {
                    const auto& hp = pred.draw(d);
                    auto s = [&](double t) { return survival(hp, spec.basis, spec.mech, x, t); };
                    CHECK(r[d] == doctest::Approx(trapezoid_rmst(s, horizon)).epsilon(1e-6));
                }
            }
        }
}

TEST_CASE("RMST grows with the horizon") {
    const auto spec = make_spec({"trt"}, true);
    const auto pred = random_predictor(spec, 20, 4);
    const std::vector<double> x{0.0};
    std::vector<double> prev(pred.size(), 0.0);
    for (double horizon : {0.5, 1.0, 3.0, 6.0, 10.0, 25.0}) {
        const auto r = rmst_draws(pred, horizon, x);
        for (std::size_t d = 0; d < r.size(); ++d) {
            CHECK(r[d] >= prev[d]);
            CHECK(r[d] <= horizon);
        }
        prev = r;
    }
}

TEST_CASE("incremental RMST") {
    const auto spec = make_spec({"trt"});
    const CovariatePattern treated{"treated", {1.0}}, control{"control", {0.0}};
    SUBCASE("identical patterns give exactly zero") {
        const auto pred = random_predictor(spec, 50, 5);
        const auto r = irmst(pred, 10.0, control, control);
        CHECK(r[0].median == 0.0);
        CHECK(r[0].lower == 0.0);
        CHECK(r[0].upper == 0.0);
    }
    SUBCASE("hazard ratio below one in every draw gives a positive difference") {
        Dataset empty;
        empty.covariates = {"trt"};
        SurvivalModel model(spec, empty, PriorConfig{});
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> hr(0.3, 0.9);
        std::vector<HazardParams> ps;
        for (int i = 0; i < 200; ++i) {
            auto hp = model.to_params(model.initial_point(rng));
            hp.beta = {std::log(hr(rng))};
            ps.push_back(hp);
        }
        const Predictor pred(spec, rows_of(spec, ps));
        CHECK(irmst(pred, 30.0, treated, control)[0].lower > 0.0);
    }
}

TEST_CASE("waning hazard ratio") {
    const WaningConfig w{5.0, 6.0, {}};
    CHECK(waning_hazard_ratio(0.5, 0.5, w, 5.5) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(std::abs(waning_hazard_ratio(0.5, 0.5, w, 5.5) - std::exp(0.5 * std::log(0.5))) < 1e-12);
    CHECK(waning_hazard_ratio(0.5, 0.5, w, 6.0) == 1.0);
    CHECK(waning_hazard_ratio(0.5, 0.5, w, 60.0) == 1.0);
    CHECK(waning_hazard_ratio(0.5, 0.7, w, 3.0) == 0.7);
    for (double t : {0.0, 5.0, 5.3, 6.0, 9.0}) CHECK(waning_hazard_ratio(1.0, 1.0, w, t) == 1.0);
    // Continuity at both ends.
    CHECK(std::abs(waning_hazard_ratio(0.5, 0.5, w, 5.0 + 1e-13) - 0.5) < 1e-12);
    CHECK(std::abs(waning_hazard_ratio(0.5, 0.5, w, 6.0 - 1e-13) - 1.0) < 1e-12);
    CHECK_THROWS((WaningConfig{5.0, 5.0, {}}.validate()));
}

TEST_CASE("waned curves") {
    const auto spec = make_spec({"trt"});
    const CovariatePattern treated{"treated", {1.0}}, control{"control", {0.0}};
    const auto pred = random_predictor(spec, 30, 8);

    SUBCASE("hazard follows the waned ratio") {
        const WaningConfig w{2.0, 5.0, control.x};
        const std::vector<double> times{1.0, 2.0, 3.5, 5.0, 8.0};
        const CurveEngine waned(spec, times, w), plain(spec, times);
        for (std::size_t d = 0; d < pred.size(); ++d) {
            const auto& hp = pred.draw(d);
            const auto cw = waned.evaluate(hp, treated.x);
            const auto c1 = plain.evaluate(hp, treated.x);
            const auto c0 = plain.evaluate(hp, control.x);
            CHECK(cw.hazard[0] == doctest::Approx(c1.hazard[0]));
            CHECK(cw.survival[1] == doctest::Approx(c1.survival[1]));
            const double hr_min = c1.hazard[1] / c0.hazard[1];
            CHECK(cw.hazard[2] == doctest::Approx(c0.hazard[2] * std::sqrt(hr_min)).epsilon(1e-10));
            CHECK(cw.hazard[3] == doctest::Approx(c0.hazard[3]));
            CHECK(cw.hazard[4] == doctest::Approx(c0.hazard[4]));
            // Survival after t_max: oracle by adaptive quadrature of the waned hazard.
            auto h = [&](double t) {
                const double h0 = hazard(hp, spec.basis, spec.mech, control.x, t);
                return h0 * waning_hazard_ratio(hr_min, 1.0, w, t);
            };
            const double window = integrate(h, 2.0, 5.0, spec.basis.breakpoints());
            const double cum = cumulative_hazard(hp, spec.basis, spec.mech, treated.x, 2.0) + window +
                               cumulative_hazard(hp, spec.basis, spec.mech, control.x, 8.0) -
                               cumulative_hazard(hp, spec.basis, spec.mech, control.x, 5.0);
            CHECK(cw.survival[4] == doctest::Approx(std::exp(-cum)).epsilon(1e-10));
        }
    }
    SUBCASE("waning toward the same pattern changes nothing") {
        const auto a = irmst(pred, 12.0, control, control, 0.95, WaningConfig{2.0, 5.0, {}});
        CHECK(std::abs(a[0].median) < 1e-10);
    }
    SUBCASE("waning RMST matches a trapezoid oracle") {
        const WaningConfig w{1.5, 7.0, control.x};
        const auto r = rmst_draws(pred, 10.0, treated.x, w);
        const CurveEngine engine(spec, {1.5}, std::nullopt);
        for (std::size_t d = 0; d < 5; ++d) {
            const auto& hp = pred.draw(d);
            std::vector<double> grid;
            for (int i = 0; i <= 20000; ++i) grid.push_back(10.0 * i / 20000.0);
            const CurveEngine fine(spec, grid, w);
            const auto cv = fine.evaluate(hp, treated.x);
            double trap = 0.5 * (cv.survival.front() + cv.survival.back());
            for (std::size_t i = 1; i + 1 < grid.size(); ++i) trap += cv.survival[i];
            trap *= 10.0 / 20000.0;
            CHECK(r[d] == doctest::Approx(trap).epsilon(1e-6));
        }
    }
    SUBCASE("a vanishing window converges to removing the effect at t_min") {
        const double tmin = 3.0, horizon = 15.0;
        for (std::size_t d = 0; d < 5; ++d) {
            const Predictor one(spec, rows_of(spec, {pred.draw(d)}));
            const auto& hp = pred.draw(d);
            // Treated survival is the control hazard after t_min.
            auto s = [&](double t) {
                if (t <= tmin) return survival(hp, spec.basis, spec.mech, treated.x, t);
                return survival(hp, spec.basis, spec.mech, treated.x, tmin) *
                       survival(hp, spec.basis, spec.mech, control.x, t) /
                       survival(hp, spec.basis, spec.mech, control.x, tmin);
            };
            std::vector<double> br = spec.basis.breakpoints();
            br.push_back(tmin);
            const double oracle =
                integrate(s, 0.0, horizon, br) - rmst_draws(one, horizon, control.x)[0];
            double prev_err = 1e300;
            for (double eps : {1.0, 1e-1, 1e-2, 1e-4, 1e-6}) {
                const auto r = irmst(one, horizon, treated, control, 0.95, WaningConfig{tmin, tmin + eps, {}});
                const double err = std::abs(r[0].median - oracle);
                CHECK(err <= prev_err + 1e-12);
                prev_err = err;
            }
            CHECK(prev_err < 1e-6);
        }
    }
}

TEST_CASE("median survival") {
    const CovariatePattern all{"all", {}};
    const auto pred = constant_predictor(0.5);
    const auto m = median_survival(pred, all);
    CHECK(std::abs(m.table[0].median - 1.3862944) < 1e-6);
    CHECK(m.table[0].median == doctest::Approx(std::log(2.0) / 0.5).epsilon(1e-10));
    CHECK(m.unreachable == 0);

    const auto spec = make_spec({}, true);
    auto hp = constant_params(spec.basis, 0.5);
    hp.cure_p = 0.6;
    const Predictor cured(spec, rows_of(spec, {hp, hp}));
    const auto mc = median_survival(cured, all);
    CHECK(mc.unreachable == 2);
    CHECK(mc.table[0].median == mc.bracket_end);
}
