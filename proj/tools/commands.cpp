#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "hazspline/calibration.hpp"
#include "hazspline/diagnostics.hpp"
#include "hazspline/io.hpp"
#include "hazspline/loo.hpp"
#include "hazspline/stats.hpp"

#ifndef HAZSPLINE_VERSION
#define HAZSPLINE_VERSION "0.0.0"
#endif

namespace hazspline::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

KnotPlacement place_knots(const RunConfig& cfg, const Dataset& data) {
    const auto& k = cfg.knots;
    if (k.internal) {
        KnotPlacement out;
        out.knots = KnotSet{*k.internal, *k.upper, 4};
        out.knots.validate();
        return out;
    }
    const auto events = data.event_times();
    if (!events.empty()) return build_knots(events, k.n_basis, k.extra, k.upper, k.smooth_boundary);
    if (!k.upper)
        throw std::invalid_argument("knots: no uncensored times to place knots at; give knots.upper or knots.internal");
    // Without events, space the knots evenly over (0, U).
    const double u = *k.upper;
    const int n_q = std::max(0, k.smooth_boundary ? k.n_basis - 2 : k.n_basis - 4);
    std::vector<double> pts;
    for (int j = 1; j <= n_q; ++j) pts.push_back(u * j / (n_q + 1));
    for (double e : k.extra)
        if (e > 0.0 && e < u) pts.push_back(e);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    KnotPlacement out;
    out.knots = KnotSet{pts, u, 4};
    out.knots.validate();
    out.warnings.push_back("no uncensored individual times; internal knots spaced evenly on (0, U)");
    return out;
}

std::vector<double> covariate_means(const Dataset& data, std::size_t n_cov) {
    std::vector<double> mean(n_cov, 0.0);
    std::size_t n = 0;
    auto add = [&](const CovariateVector& x) {
        for (std::size_t c = 0; c < n_cov; ++c) mean[c] += x[c];
        ++n;
    };
    if (!data.individual.empty()) {
        for (const auto& r : data.individual) add(r.x);
    } else {
        for (const auto& r : data.external) add(r.x);
    }
    if (n > 0)
        for (auto& m : mean) m /= static_cast<double>(n);
    return mean;
}

std::size_t covariate_index(const std::vector<std::string>& covs, const std::string& name) {
    return static_cast<std::size_t>(std::find(covs.begin(), covs.end(), name) - covs.begin());
}

json pattern_json(const CovariatePattern& p) { return {{"label", p.label}, {"x", p.x}}; }

CovariatePattern pattern_from_json(const json& j) { return {j.at("label").get<std::string>(), j.at("x").get<CovariateVector>()}; }

std::string model_json(const ModelSetup& s, const RunConfig& cfg) {
    const auto& ks = s.spec.basis.knots();
    json bg = nullptr;
    if (s.spec.mech.background)
        bg = {{"start", s.spec.mech.background->breakpoints()}, {"rate", s.spec.mech.background->rates()}};
    json patterns = json::array();
    for (const auto& p : s.patterns) patterns.push_back(pattern_json(p));
    json contrast = nullptr;
    if (s.contrast) contrast = {{"treated", pattern_json(s.contrast->first)}, {"control", pattern_json(s.contrast->second)}};
    const json j{{"version", HAZSPLINE_VERSION},
                 {"seed", cfg.sampler.seed},
                 {"knots",
                  {{"internal", ks.internal},
                   {"upper", ks.upper},
                   {"order", ks.order},
                   {"smooth_boundary", s.spec.basis.smooth_boundary()}}},
                 {"n_basis", s.spec.n_basis()},
                 {"covariates", s.spec.covariates},
                 {"mechanism", {{"cure", s.spec.mech.cure}, {"additive", s.spec.mech.additive}, {"nonprop", s.spec.nonprop}}},
                 {"background", bg},
                 {"n_individual", s.data.individual.size()},
                 {"n_external", s.data.external.size()},
                 {"patterns", patterns},
                 {"contrast", contrast},
                 {"warnings", s.warnings}};
    return j.dump(2) + "\n";
}

std::vector<std::string> observation_names(std::size_t n_ind, std::size_t n_ext) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_ind; ++i) names.push_back("individual_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n_ext; ++i) names.push_back("external_" + std::to_string(i + 1));
    return names;
}

std::string loo_json(const LooResult& r, const std::vector<std::string>& names) {
    json pointwise = json::array();
    for (std::size_t i = 0; i < r.elpd.size(); ++i)
        pointwise.push_back({{"observation", names.at(i)},
                             {"elpd", finite_or_null(r.elpd[i])},
                             {"max_weight", finite_or_null(r.max_weight[i])},
                             {"unreliable", static_cast<bool>(r.unreliable[i])}});
    const json j{{"method", "importance sampling with self-normalised raw weights, no Pareto smoothing"},
                 {"elpd_loo", finite_or_null(r.elpd_total)},
                 {"looic", finite_or_null(r.looic)},
                 {"se_looic", finite_or_null(r.se_looic)},
                 {"n_observations", r.elpd.size()},
                 {"n_unreliable", r.n_unreliable},
                 {"pointwise", pointwise}};
    return j.dump(2) + "\n";
}

std::string diagnostics_json(const PosteriorDraws& draws, const Diagnostics& d, const RunConfig& cfg,
                             const std::vector<std::string>& model_warnings) {
    json params = json::array();
    for (const auto& p : d.parameters)
        params.push_back({{"name", p.name},
                          {"mean", finite_or_null(p.mean)},
                          {"sd", finite_or_null(p.sd)},
                          {"q025", finite_or_null(p.q025)},
                          {"median", finite_or_null(p.median)},
                          {"q975", finite_or_null(p.q975)},
                          {"rhat", finite_or_null(p.rhat)},
                          {"ess", finite_or_null(p.ess)}});
    json chains = json::array();
    for (const auto& s : draws.stats)
        chains.push_back({{"step_size", s.step_size},
                          {"mean_accept", s.mean_accept},
                          {"divergences", s.divergences},
                          {"max_depth_hits", s.max_depth_hits},
                          {"gradient_evals", s.gradient_evals}});
    std::vector<std::string> warnings = model_warnings;
    warnings.insert(warnings.end(), d.warnings.begin(), d.warnings.end());
    const json j{{"version", HAZSPLINE_VERSION},
                 {"seed", cfg.sampler.seed},
                 {"algorithm", cfg.sampler.algorithm == Algorithm::nuts ? "nuts" : "rwm"},
                 {"n_chains", draws.n_chains},
                 {"n_draws", draws.size()},
                 {"divergences", d.divergences},
                 {"divergence_rate", d.divergence_rate},
                 {"max_rhat", finite_or_null(d.max_rhat())},
                 {"min_ess", finite_or_null(d.min_ess())},
                 {"warnings", warnings},
                 {"chains", chains},
                 {"parameters", params}};
    return j.dump(2) + "\n";
}

Eigen::MatrixXd with_chain_column(const Eigen::MatrixXd& m, const std::vector<int>& chain) {
    Eigen::MatrixXd out(m.rows(), m.cols() + 1);
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, 0) = chain[static_cast<std::size_t>(i)] + 1;
    out.rightCols(m.cols()) = m;
    return out;
}

Eigen::MatrixXd read_persisted(const fs::path& path, std::vector<std::string>& names) {
    if (!fs::exists(path))
        throw std::runtime_error(path.filename().string() + " not found in " + path.parent_path().string() +
                                 "; rerun fit with output.save_draws set to true");
    std::vector<std::string> header;
    const auto m = read_matrix_csv(path, header);
    if (header.empty() || header.front() != "chain") throw InputError(path.string(), 1, "first column must be chain");
    names.assign(header.begin() + 1, header.end());
    return m.rightCols(m.cols() - 1);
}

std::string waning_label(const std::string& base, const WaningScenario& w) {
    return base + ", waning " + format_double(w.t_min) + " to " + format_double(w.t_max);
}

void append(SummaryTable& to, SummaryTable from) {
    to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

bool wants(const RunConfig& cfg, const std::string& q) {
    return std::find(cfg.output.quantities.begin(), cfg.output.quantities.end(), q) != cfg.output.quantities.end();
}

std::vector<double> grid(double from, double to, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(n - 1);
    t.back() = to;
    return t;
}

json quantile_summary(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return {{"q025", quantile_sorted(v, 0.025)},
            {"q10", quantile_sorted(v, 0.10)},
            {"median", quantile_sorted(v, 0.5)},
            {"q90", quantile_sorted(v, 0.90)},
            {"q975", quantile_sorted(v, 0.975)}};
}

}  // namespace

ModelSetup prepare_model(const RunConfig& cfg) {
    Dataset data;
    data.covariates = cfg.covariates;
    if (!cfg.data.individual.empty()) data.individual = read_individual(cfg.data.individual, cfg.covariates);
    if (!cfg.data.external.empty()) data.external = read_external(cfg.data.external, cfg.covariates);

    MechanismConfig mech;
    mech.cure = cfg.model.cure;
    mech.additive = cfg.model.additive;
    if (cfg.model.additive) {
        if (cfg.data.background.empty())
            throw std::invalid_argument("model.additive requires a background hazard file (data.background)");
        mech.background = read_background(cfg.data.background);
    }
    mech.validate();

    auto placement = place_knots(cfg, data);
    MSplineBasis basis(placement.knots);
    if (cfg.knots.smooth_boundary) basis = reduce_smooth_boundary(basis);
    ModelSetup s{ModelSpec{std::move(basis), std::move(mech), cfg.covariates, cfg.model.nonprop},
                 std::move(data), {}, std::nullopt, placement.warnings};

    const auto mean = covariate_means(s.data, cfg.covariates.size());
    if (cfg.treatment) {
        const auto t = covariate_index(cfg.covariates, *cfg.treatment);
        CovariatePattern control{"control", mean}, treated{"treated", mean};
        control.x[t] = 0.0;
        treated.x[t] = 1.0;
        s.contrast = std::make_pair(treated, control);
    }
    if (!cfg.output.patterns.empty()) {
        for (const auto& p : cfg.output.patterns) {
            CovariatePattern cp{p.label, mean};
            for (const auto& [name, v] : p.values) cp.x[covariate_index(cfg.covariates, name)] = v;
            s.patterns.push_back(std::move(cp));
        }
    } else if (s.contrast) {
        s.patterns = {s.contrast->second, s.contrast->first};
    } else {
        s.patterns = {{cfg.covariates.empty() ? "all" : "mean", mean}};
    }
    return s;
}

SummaryTable compute_summaries(const RunConfig& cfg, const ModelSpec& spec, const std::vector<CovariatePattern>& patterns,
                               const std::optional<std::pair<CovariatePattern, CovariatePattern>>& contrast,
                               const Predictor& pred, const SummaryRequest& request) {
    const double level = request.level.value_or(cfg.output.level);
    const double u = spec.basis.upper();
    const bool targeted = !request.rmst_horizons.empty() || !request.waning.empty();
    const auto horizons = !request.rmst_horizons.empty() ? request.rmst_horizons
                          : !cfg.output.rmst_horizons.empty() ? cfg.output.rmst_horizons
                                                              : std::vector<double>{u};
    const auto waning = !request.waning.empty() ? request.waning : cfg.output.waning;
    const auto times = !cfg.output.times.empty() ? cfg.output.times : grid(0.0, u, cfg.output.grid_points);

    SummaryTable out;
    if (!targeted) {
        for (const auto& p : patterns) {
            if (wants(cfg, "survival")) append(out, curve_summary(pred, Quantity::survival, times, p, level));
            if (wants(cfg, "hazard")) append(out, curve_summary(pred, Quantity::hazard, times, p, level));
        }
    }
    if (!targeted || !request.rmst_horizons.empty()) {
        if (targeted || wants(cfg, "rmst"))
            for (const auto& p : patterns)
                for (double h : horizons) append(out, rmst(pred, h, p, level));
    }
    if (contrast && (targeted || wants(cfg, "irmst"))) {
        const auto& [treated, control] = *contrast;
        for (double h : horizons) append(out, irmst(pred, h, treated, control, level));
        for (const auto& w : waning)
            for (double h : horizons) {
                auto rows = irmst(pred, h, treated, control, level, WaningConfig{w.t_min, w.t_max, {}});
                for (auto& r : rows) r.label = waning_label(r.label, w);
                append(out, std::move(rows));
            }
    }
    if (!targeted && wants(cfg, "median"))
        for (const auto& p : patterns) append(out, median_survival(pred, p, level).table);
    return out;
}

SummaryTable compute_curves(const RunConfig& cfg, const ModelSpec& spec, const std::vector<CovariatePattern>& patterns,
                            const Predictor& pred) {
    const auto times = grid(0.0, 2.0 * spec.basis.upper(), cfg.output.curve_points);
    SummaryTable out;
    for (const auto& p : patterns) {
        append(out, curve_summary(pred, Quantity::survival, times, p, cfg.output.level));
        append(out, curve_summary(pred, Quantity::hazard, times, p, cfg.output.level));
    }
    return out;
}

StoredModel load_results(const fs::path& dir) {
    const auto cfg_path = dir / "config.json";
    const auto model_path = dir / "model.json";
    if (!fs::exists(cfg_path) || !fs::exists(model_path))
        throw std::runtime_error(dir.string() + " is not a results directory (config.json or model.json missing)");
    auto config = parse_config(read_text(cfg_path), cfg_path.string(), dir);
    try {
        const auto j = json::parse(read_text(model_path));
        const auto& k = j.at("knots");
        MSplineBasis basis(KnotSet{k.at("internal").get<std::vector<double>>(), k.at("upper").get<double>(),
                                   k.at("order").get<int>()});
        if (k.at("smooth_boundary").get<bool>()) basis = reduce_smooth_boundary(basis);
        MechanismConfig mech;
        mech.cure = j.at("mechanism").at("cure").get<bool>();
        mech.additive = j.at("mechanism").at("additive").get<bool>();
        if (!j.at("background").is_null())
            mech.background = BackgroundHazard(j.at("background").at("start").get<std::vector<double>>(),
                                               j.at("background").at("rate").get<std::vector<double>>());
        StoredModel m{std::move(config),
                      ModelSpec{std::move(basis), std::move(mech), j.at("covariates").get<std::vector<std::string>>(),
                                j.at("mechanism").at("nonprop").get<bool>()},
                      {},
                      std::nullopt};
        for (const auto& p : j.at("patterns")) m.patterns.push_back(pattern_from_json(p));
        if (!j.at("contrast").is_null())
            m.contrast = std::make_pair(pattern_from_json(j.at("contrast").at("treated")),
                                        pattern_from_json(j.at("contrast").at("control")));
        return m;
    } catch (const json::exception& e) {
        throw InputError(model_path.string(), 0, e.what());
    }
}

fs::path cmd_fit(const fs::path& config_path, std::ostream& log) {
    const auto cfg = load_config(config_path);
    if (cfg.data.individual.empty() && cfg.data.external.empty())
        throw std::invalid_argument("fit needs data.individual or data.external");
    auto setup = prepare_model(cfg);
    for (const auto& w : setup.warnings) log << "warning: " << w << "\n";
    const SurvivalModel model(setup.spec, setup.data, cfg.priors);
    log << "fitting " << setup.data.individual.size() << " individual record(s) and " << setup.data.external.size()
        << " external row(s) with " << setup.spec.n_basis() << " basis terms\n";
    const auto draws = sample_posterior(model, cfg.sampler);
    const auto diag = diagnose(draws);
    for (const auto& w : diag.warnings) log << "warning: " << w << "\n";

    const fs::path dir = cfg.output.dir;
    fs::create_directories(dir);
    write_text(dir / "config.json", config_echo(cfg));
    write_text(dir / "model.json", model_json(setup, cfg));
    write_text(dir / "diagnostics.json", diagnostics_json(draws, diag, cfg, setup.warnings));

    const Predictor pred(setup.spec, draws.draws);
    const auto table = compute_summaries(cfg, setup.spec, setup.patterns, setup.contrast, pred);
    write_text(dir / "summaries.csv", summary_csv(table));
    write_text(dir / "summaries.json", summary_json(table));
    write_text(dir / "curves.csv", summary_csv(compute_curves(cfg, setup.spec, setup.patterns, pred)));

    const auto obs = observation_names(setup.data.individual.size(), setup.data.external.size());
    write_text(dir / "loo.json", loo_json(loo(draws.loglik), obs));

    std::error_code ec;
    if (cfg.output.save_draws) {
        std::vector<std::string> header{"chain"};
        header.insert(header.end(), draws.names.begin(), draws.names.end());
        write_matrix_csv(dir / "draws.csv", header, with_chain_column(draws.draws, draws.chain));
        header = {"chain"};
        header.insert(header.end(), obs.begin(), obs.end());
        write_matrix_csv(dir / "loglik.csv", header, with_chain_column(draws.loglik, draws.chain));
    } else {
        // A rerun without persistence must not leave stale draws behind.
        fs::remove(dir / "draws.csv", ec);
        fs::remove(dir / "loglik.csv", ec);
    }
    log << "max R-hat " << diag.max_rhat() << ", min ESS " << diag.min_ess() << ", " << diag.divergences
        << " divergent transition(s)\n";
    log << "results written to " << dir.string() << "\n";
    return dir;
}

std::string cmd_prior_sim(const fs::path& config_path, std::ostream& log) {
    const auto cfg = load_config(config_path);
    const auto setup = prepare_model(cfg);
    for (const auto& w : setup.warnings) log << "warning: " << w << "\n";
    const auto& basis = setup.spec.basis;
    std::mt19937_64 rng(cfg.sampler.seed);
    const auto rho = simulate_prior_rho(basis, cfg.priors, cfg.prior_sim.n_sims, cfg.prior_sim.grid, rng);
    const auto mean_surv = simulate_prior_mean_survival(basis, cfg.priors, cfg.prior_sim.n_sims, rng);

    json j{{"version", HAZSPLINE_VERSION},
           {"seed", cfg.sampler.seed},
           {"n_sims", cfg.prior_sim.n_sims},
           {"upper_knot", basis.upper()},
           {"n_basis", basis.size()},
           {"sigma_prior", {{"shape", cfg.priors.sigma.shape}, {"rate", cfg.priors.sigma.rate}}},
           {"log_eta0_prior", {{"location", cfg.priors.log_eta0.location}, {"scale", cfg.priors.log_eta0.scale}}},
           {"rho", quantile_summary(rho)},
           {"mean_survival", quantile_summary(mean_surv)}};
    if (const auto& t = cfg.prior_sim.calibrate_sigma) {
        const auto c = calibrate_sigma_prior(t->median, t->upper, basis, cfg.prior_sim.n_sims, cfg.prior_sim.grid,
                                             cfg.sampler.seed);
        j["calibrate_sigma"] = {{"target_median", t->median},
                                {"target_upper", t->upper},
                                {"shape", c.prior.shape},
                                {"rate", c.prior.rate},
                                {"median_rho", c.median_rho},
                                {"upper_rho", c.upper_rho},
                                {"attained", c.attained},
                                {"note", c.note}};
    }
    if (const auto& t = cfg.prior_sim.calibrate_scale) {
        const auto c = calibrate_scale_prior(t->mean, t->low, t->high, basis);
        j["calibrate_scale"] = {{"target_mean", t->mean},
                                {"target_low", t->low},
                                {"target_high", t->high},
                                {"location", c.prior.location},
                                {"scale", c.prior.scale},
                                {"low", c.low},
                                {"high", c.high},
                                {"symmetric", c.symmetric},
                                {"note", c.note}};
    }
    const auto text = j.dump(2) + "\n";
    const fs::path dir = cfg.output.dir;
    fs::create_directories(dir);
    write_text(dir / "prior_sim.json", text);
    log << "prior simulation written to " << (dir / "prior_sim.json").string() << "\n";
    return text;
}

fs::path cmd_summarise(const fs::path& results, const SummaryRequest& request, const std::string& out_name,
                       std::ostream& log) {
    const auto stored = load_results(results);
    std::vector<std::string> names;
    const auto draws = read_persisted(results / "draws.csv", names);
    const auto expected = ParameterLayout::make(stored.spec).constrained_names(stored.spec.covariates);
    if (names != expected) throw InputError((results / "draws.csv").string(), 1, "columns do not match model.json");
    if (request.level && !(*request.level > 0.0 && *request.level < 1.0))
        throw std::invalid_argument("--level must be in (0, 1)");
    for (const auto& w : request.waning)
        if (!(w.t_min >= 0.0 && w.t_max > w.t_min)) throw std::invalid_argument("--waning needs 0 <= t_min < t_max");
    if (!request.waning.empty() && !stored.contrast)
        throw std::invalid_argument("--waning needs a treatment column in the fitted configuration");
    for (double h : request.rmst_horizons)
        if (!(h > 0.0)) throw std::invalid_argument("--rmst horizons must be positive");

    const Predictor pred(stored.spec, draws);
    const auto table = compute_summaries(stored.config, stored.spec, stored.patterns, stored.contrast, pred, request);
    const auto csv = results / (out_name + ".csv");
    write_text(csv, summary_csv(table));
    write_text(results / (out_name + ".json"), summary_json(table));
    log << table.size() << " summary row(s) written to " << csv.string() << "\n";
    return csv;
}

std::string cmd_loo(const fs::path& results, std::ostream& log) {
    std::vector<std::string> names;
    const auto ll = read_persisted(results / "loglik.csv", names);
    const auto r = loo(ll);
    const auto text = loo_json(r, names);
    write_text(results / "loo.json", text);
    log << "LOOIC " << r.looic << " (se " << r.se_looic << "), " << r.n_unreliable << " unreliable observation(s)\n";
    return text;
}

int run(int argc, char** argv) {
    CLI::App app{"Bayesian survival extrapolation with M-spline hazards"};
    app.set_version_flag("--version", HAZSPLINE_VERSION);
    app.require_subcommand(1);

    std::string config_path, results_dir, out_name = "summarise";
    std::vector<double> horizons;
    std::vector<std::vector<double>> waning;
    std::optional<double> level;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    auto* fit = app.add_subcommand("fit", "Fit a model and write a results directory");
    fit->add_option("config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);

    auto* prior = app.add_subcommand("prior-sim", "Simulate the prior for rho and mean survival");
    prior->add_option("config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);

    auto* summ = app.add_subcommand("summarise", "Recompute summaries from persisted draws");
    summ->alias("summarize");
    summ->add_option("results", results_dir, "Results directory written by fit")->required()->check(CLI::ExistingDirectory);
    summ->add_option("--rmst", horizons, "RMST horizons")->expected(1, -1);
    summ->add_option("--waning", waning, "Waning window: t_min t_max (repeatable)")
        ->expected(2)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    summ->add_option("--level", level, "Interval level in (0, 1)");
    summ->add_option("--out", out_name, "Output file stem inside the results directory");

    auto* loo_cmd = app.add_subcommand("loo", "Recompute leave-one-out model comparison");
    loo_cmd->add_option("results", results_dir, "Results directory written by fit")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    std::ostringstream sink;
    std::ostream& log = quiet ? static_cast<std::ostream&>(sink) : std::cerr;
    try {
        if (*fit) {
            cmd_fit(config_path, log);
        } else if (*prior) {
            std::cout << cmd_prior_sim(config_path, log);
        } else if (*summ) {
            SummaryRequest req{horizons, {}, level};
            for (const auto& w : waning) {
                if (w.size() != 2) throw std::invalid_argument("--waning takes two values: t_min t_max");
                req.waning.push_back({w[0], w[1]});
            }
            cmd_summarise(results_dir, req, out_name, log);
        } else if (*loo_cmd) {
            std::cout << cmd_loo(results_dir, log);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace hazspline::cli
