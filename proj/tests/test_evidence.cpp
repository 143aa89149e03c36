#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hazspline/evidence.hpp"
#include "hazspline/stats.hpp"
#include "test_support.hpp"

using namespace hazspline;
using namespace hazspline::testing;

namespace {

MSplineBasis cubic_basis() { return reduce_smooth_boundary(MSplineBasis(KnotSet{{1.0, 2.5, 4.0, 6.0}, 8.0, 4})); }

// Approximate equality that also accepts matching infinities.
bool close(double a, double b, double tol = 1e-10) { return a == b || a == doctest::Approx(b).epsilon(tol); }

double binom_lpmf(double n, double r, double p) {
    return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1) + r * std::log(p) +
           (n - r) * std::log1p(-p);
}

SurvivalModel bare_model(Dataset data, bool cure = false) {
    ModelSpec spec{cubic_basis(), {}, data.covariates, false};
    spec.mech.cure = cure;
    return SurvivalModel(spec, std::move(data), PriorConfig{});
}

}  // namespace

TEST_CASE("elicitation to pseudo-data") {
    auto row = elicitation_to_external(724, 276, 0, 5);
    CHECK(row.r == 724);
    CHECK(row.n == 1000);
    row = elicitation_to_external(72, 28, 5, 10);
    CHECK(row.r == 72);
    CHECK(row.n == 100);
    row = elicitation_to_external(3.5, 3.5, 0, 1);
    CHECK(row.r / row.n == 0.5);
    CHECK_THROWS(elicitation_to_external(0.0, 1.0, 0, 1));
    CHECK_THROWS(elicitation_to_external(1.0, 1.0, 2, 1));
}

TEST_CASE("individual likelihood under a constant hazard") {
    const auto basis = cubic_basis();
    const double lambda = 0.4;
    const auto hp = constant_params(basis, lambda);
    const MechanismConfig none;
    std::vector<IndividualRecord> recs{{2.0, true, {}}, {2.0, false, {}}};
    const auto ll = loglik_individual(recs, hp, basis, none);
    CHECK(ll.pointwise[0] == doctest::Approx(std::log(lambda) - 2 * lambda));
    CHECK(ll.pointwise[1] == doctest::Approx(-2 * lambda));
    auto doubled = recs;
    doubled.insert(doubled.end(), recs.begin(), recs.end());
    CHECK(loglik_individual(doubled, hp, basis, none).total == doctest::Approx(2 * ll.total));

    // Zero hazard at an event is -inf, not an exception.
    auto zero = hp;
    zero.log_eta0 = -1000;
    CHECK(loglik_individual(recs, zero, basis, none).pointwise[0] == -std::numeric_limits<double>::infinity());
}

TEST_CASE("external likelihood") {
    const auto basis = cubic_basis();
    const MechanismConfig none;
    SUBCASE("closed form at half survival") {
        const auto hp = constant_params(basis, std::numbers::ln2 / 5);
        std::vector<ExternalRow> rows{{5, 10, 100, 50, {}}};
        const auto ll = loglik_external(rows, hp, basis, none);
        CHECK(ll.total == doctest::Approx(log_choose(100, 50) - 100 * std::numbers::ln2).epsilon(1e-12));
        CHECK(log_choose(100, 50) == doctest::Approx(std::log(1.0089134454556417e29)).epsilon(1e-12));
    }
    SUBCASE("all survive under a vanishing hazard") {
        const auto hp = constant_params(basis, 1e-12);
        std::vector<ExternalRow> rows{{0, 5, 40, 40, {}}};
        CHECK(std::abs(loglik_external(rows, hp, basis, none).total) < 1e-9);
    }
    SUBCASE("start at zero is unconditional survival") {
        const double lambda = 0.21;
        const auto hp = constant_params(basis, lambda);
        std::vector<ExternalRow> rows{{0, 3, 50, 20, {}}};
        CHECK(loglik_external(rows, hp, basis, none).total ==
              doctest::Approx(binom_lpmf(50, 20, std::exp(-3 * lambda))).epsilon(1e-12));
    }
    SUBCASE("split rows agree with the multinomial oracle") {
        for (double lambda : {0.05, 0.2, 0.9}) {
            const auto hp = constant_params(basis, lambda);
            const double n = 120, m = 70, r = 31;
            std::vector<ExternalRow> split{{1, 4, n, m, {}}, {4, 9, m, r, {}}};
            const double p1 = std::exp(-3 * lambda), p2 = std::exp(-5 * lambda);
            const double multinomial = std::lgamma(n + 1) - std::lgamma(n - m + 1) - std::lgamma(m - r + 1) -
                                       std::lgamma(r + 1) + (n - m) * std::log1p(-p1) +
                                       (m - r) * (std::log(p1) + std::log1p(-p2)) + r * (std::log(p1) + std::log(p2));
            CHECK(loglik_external(split, hp, basis, none).total == doctest::Approx(multinomial).epsilon(1e-12));
            // The kernel of the unsplit row differs from the split one only through the
            // deaths in the second sub-interval.
            std::vector<ExternalRow> whole{{1, 9, n, r, {}}};
            const double whole_ll = loglik_external(whole, hp, basis, none).total;
            CHECK(whole_ll == doctest::Approx(binom_lpmf(n, r, p1 * p2)).epsilon(1e-12));
        }
    }
    SUBCASE("contradicting counts give -inf") {
        auto hp = constant_params(basis, 1.0);
        hp.log_eta0 = -1000;
        std::vector<ExternalRow> rows{{0, 5, 40, 0, {}}};
        CHECK(loglik_external(rows, hp, basis, none).total == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("validation") {
        CHECK_THROWS(ExternalRow{5, 5, 10, 5, {}}.validate());
        CHECK_THROWS(ExternalRow{0, 5, 10, 11, {}}.validate());
        CHECK_THROWS(ExternalRow{-1, 5, 10, 1, {}}.validate());
    }
}

TEST_CASE("prior pieces") {
    CHECK(std::exp(gamma_lpdf(1.0, 2.0, 1.0)) == doctest::Approx(std::exp(-1.0)));
    const PriorConfig defaults;
    CHECK(defaults.log_eta0.location == 0.0);
    CHECK(defaults.log_eta0.scale == 20.0);
    CHECK(defaults.loghr_for(3).scale == 2.5);
    CHECK(defaults.loghr_for(0).location == 0.0);
    CHECK(defaults.sigma.shape == 2.0);
    CHECK(defaults.sigma.rate == 1.0);
}

TEST_CASE("prior-mean logits reproduce the constant-hazard simplex") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        MSplineBasis full(random_knots(rng));
        for (const auto& basis : {full, reduce_smooth_boundary(full)}) {
            const auto mu = constant_hazard_logits(basis);
            CHECK(mu[0] == 0.0);
            HazardParams hp;
            hp.gamma = mu;
            const auto p = coefficients_for(hp, basis, std::vector<double>{});
            const auto pc = basis.constant_coefficients();
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - pc[i]) < 1e-10);
        }
    }
}

TEST_CASE("analytic gradient matches finite differences") {
    for (auto v : {Variant::ph, Variant::nonph, Variant::cure, Variant::additive, Variant::external}) {
        const std::string vname = variant_name(v);
        CAPTURE(vname);
        const auto model = make_variant_model(v, 3);
        std::mt19937_64 rng(100 + static_cast<int>(v));
        for (int rep = 0; rep < 20; ++rep) {
            const auto theta = model.initial_point(rng);
            CHECK(gradient_error(model, theta) < 1e-5);
        }
    }
}

TEST_CASE("precomputed likelihood matches direct evaluation") {
    for (auto v : {Variant::ph, Variant::nonph, Variant::cure, Variant::additive, Variant::external}) {
        const std::string vname = variant_name(v);
        CAPTURE(vname);
        const auto model = make_variant_model(v, 5);
        std::mt19937_64 rng(9);
        for (int rep = 0; rep < 10; ++rep) {
            const auto theta = model.initial_point(rng);
            const auto hp = model.to_params(theta);
            const auto& sp = model.spec();
            const auto li = loglik_individual(model.data().individual, hp, sp.basis, sp.mech);
            const auto le = loglik_external(model.data().external, hp, sp.basis, sp.mech);
            CHECK(close(model.log_likelihood(theta), li.total + le.total));
            const auto pw = model.pointwise_loglik(theta);
            REQUIRE(static_cast<std::size_t>(pw.size()) == li.pointwise.size() + le.pointwise.size());
            for (std::size_t i = 0; i < li.pointwise.size(); ++i)
                CHECK(close(pw[static_cast<Eigen::Index>(i)], li.pointwise[i]));
            for (std::size_t j = 0; j < le.pointwise.size(); ++j)
                CHECK(close(pw[static_cast<Eigen::Index>(li.pointwise.size() + j)], le.pointwise[j]));
        }
    }
}

TEST_CASE("unconstrained prior equals the constrained prior plus the change of variables") {
    for (auto v : {Variant::ph, Variant::nonph, Variant::cure}) {
        const auto model = make_variant_model(v, 2);
        const auto& l = model.layout();
        std::mt19937_64 rng(13);
        for (int rep = 0; rep < 10; ++rep) {
            const auto theta = model.prior_draw(rng);
            const auto hp = model.to_params(theta);
            const double m1 = static_cast<double>(l.n_basis - 1);
            double jac = m1 * std::log(hp.sigma) + std::log(hp.sigma);
            for (double t : hp.tau) jac += m1 * std::log(t) + std::log(t);
            if (hp.cure_p) jac += std::log(*hp.cure_p) + std::log1p(-*hp.cure_p);
            CHECK(model.log_prior(theta) ==
                  doctest::Approx(log_prior_constrained(model.spec(), hp, model.priors()) + jac).epsilon(1e-10));
        }
    }
}

TEST_CASE("parameter maps round-trip") {
    const auto model = make_variant_model(Variant::nonph, 2);
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        const auto theta = model.initial_point(rng);
        const auto back = model.from_params(model.to_params(theta));
        CHECK((back - theta).cwiseAbs().maxCoeff() < 1e-10);
        const auto row = model.to_constrained(theta);
        const auto hp = params_from_constrained(model.spec(), std::vector<double>(row.begin(), row.end()));
        const auto again = model.from_params(hp);
        CHECK((again - theta).cwiseAbs().maxCoeff() < 1e-8);
        const auto names = model.layout().constrained_names(model.spec().covariates);
        CHECK(names.size() == static_cast<std::size_t>(row.size()));
    }
}

TEST_CASE("posterior composition") {
    SUBCASE("no data leaves the prior") {
        Dataset empty;
        const auto model = bare_model(empty, true);
        std::mt19937_64 rng(1);
        for (int rep = 0; rep < 5; ++rep) {
            const auto theta = model.prior_draw(rng);
            CHECK(model.log_posterior(theta) == doctest::Approx(model.log_prior(theta)));
        }
    }
    SUBCASE("likelihood factorises over concatenated data") {
        std::mt19937_64 rng(2);
        Dataset a, b, ab;
        a.individual = simulate_exponential(rng, 30, 0.3, 6.0);
        b.individual = simulate_exponential(rng, 20, 0.3, 6.0);
        b.external.push_back({0, 5, 50, 20, {}});
        ab.individual = a.individual;
        ab.individual.insert(ab.individual.end(), b.individual.begin(), b.individual.end());
        ab.external = b.external;
        const auto ma = bare_model(a), mb = bare_model(b), mab = bare_model(ab);
        for (int rep = 0; rep < 5; ++rep) {
            const auto theta = ma.initial_point(rng);
            CHECK(mab.log_likelihood(theta) ==
                  doctest::Approx(ma.log_likelihood(theta) + mb.log_likelihood(theta)).epsilon(1e-12));
        }
    }
    SUBCASE("binomial score vanishes at the matching survival probability") {
        Dataset d;
        d.external.push_back({0, 5, 100, 30, {}});
        const auto model = bare_model(d);
        const auto& basis = model.spec().basis;
        auto hp = constant_params(basis, -std::log(0.3) / 5);
        const auto theta = model.from_params(hp);
        Eigen::VectorXd g_post, g_prior;
        model.log_posterior(theta, g_post);
        (void)model.log_prior(theta, g_prior);
        const auto g_lik = g_post - g_prior;
        CHECK(std::abs(g_lik[static_cast<Eigen::Index>(model.layout().log_eta0)]) < 1e-9);
    }
    SUBCASE("prior is finite for any finite unconstrained vector") {
        const auto model = make_variant_model(Variant::nonph, 1);
        const auto cure = make_variant_model(Variant::cure, 1);
        std::mt19937_64 rng(6);
        std::normal_distribution<double> wide(0.0, 30.0);
        for (const SurvivalModel* m : {&model, &cure}) {
            for (int rep = 0; rep < 100; ++rep) {
                Eigen::VectorXd th(static_cast<Eigen::Index>(m->dim()));
                for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = wide(rng);
                CHECK(std::isfinite(m->log_prior(th)));
            }
        }
    }
}
