#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "hazspline/io.hpp"

using namespace hazspline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("hazspline_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_individual(const fs::path& p, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ev(0.3);
    std::uniform_real_distribution<double> cens(0.0, 12.0);
    std::ostringstream out;
    out << "time,event,trt\n";
    for (std::size_t i = 0; i < n; ++i) {
        const int trt = static_cast<int>(i % 2);
        const double t = ev(rng) / (trt ? 0.6 : 1.0), c = cens(rng);
        out << format_double(std::min(t, c)) << "," << (t <= c ? 1 : 0) << "," << trt << "\n";
    }
    write_text(p, out.str());
}

std::string read(const fs::path& p) { return read_text(p); }

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    return dir / name;
}

const char* kFitConfig = R"({
  "data": {"individual": "ind.csv", "external": "ext.csv"},
  "covariates": ["trt"],
  "treatment": "trt",
  "knots": {"n_basis": 6, "upper": 15},
  "sampler": {"chains": 2, "warmup": 200, "iterations": 200, "seed": 11},
  "output": {"dir": "res", "save_draws": true, "rmst_horizons": [5, 10], "times": [0, 1, 5, 10]}
})";

}  // namespace

TEST_CASE("csv readers") {
    TempDir tmp;
    write_text(tmp.path / "a.csv", "# comment\ntime,event,age\n1.5,1,60\n\n2,0,\"61\"\n");
    const auto recs = read_individual(tmp.path / "a.csv", {"age"});
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].time == 1.5);
    CHECK(recs[0].event);
    CHECK(!recs[1].event);
    CHECK(recs[1].x == std::vector<double>{61.0});

    try {
        (void)read_individual(tmp.path / "a.csv", {"sex", "age", "stage"});
        FAIL("expected an error");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sex") != std::string::npos);
        CHECK(msg.find("stage") != std::string::npos);
    }
    write_text(tmp.path / "b.csv", "time,event\n1,1\n-2,0\n");
    try {
        (void)read_individual(tmp.path / "b.csv", {});
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(e.line() == 3);
    }
    write_text(tmp.path / "c.csv", "time,event\n1,1\n2,x\n");
    CHECK_THROWS_AS((void)read_individual(tmp.path / "c.csv", {}), InputError);
    write_text(tmp.path / "d.csv", "time,event\n1,1,3\n");
    CHECK_THROWS_AS((void)read_individual(tmp.path / "d.csv", {}), InputError);

    write_text(tmp.path / "e.csv", "start,stop,n,r,trt\n5,10,100,50,0\n10,15,100,40,1\n");
    const auto ext = read_external(tmp.path / "e.csv", {"trt"});
    REQUIRE(ext.size() == 2);
    CHECK(ext[1].r == 40.0);
    CHECK(ext[1].x == std::vector<double>{1.0});
    CHECK_THROWS_AS((void)read_external(tmp.path / "e.csv", {"age"}), InputError);
    write_text(tmp.path / "f.csv", "start,stop,n,r\n5,10,100,150\n");
    CHECK_THROWS_AS((void)read_external(tmp.path / "f.csv", {}), InputError);

    write_text(tmp.path / "bg.csv", "start,rate\n0,0.01\n5,0.02\n");
    const auto bg = read_background(tmp.path / "bg.csv");
    CHECK(bg.rate(5.0) == 0.02);
}

TEST_CASE("matrix csv round trip is exact") {
    TempDir tmp;
    Eigen::MatrixXd m(3, 2);
    m << 0.1, 1.0 / 3.0, -1e-300, 123456789.123456789, std::nextafter(1.0, 2.0), -0.0;
    write_matrix_csv(tmp.path / "m.csv", {"a", "b"}, m);
    std::vector<std::string> header;
    const auto back = read_matrix_csv(tmp.path / "m.csv", header);
    CHECK(header == std::vector<std::string>{"a", "b"});
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(back(i, j) == m(i, j));
}

TEST_CASE("summary table formats") {
    const SummaryTable t{{"rmst", "a, b", 5.0, 1.0, 0.5, 1.5, 0.95}};
    CHECK(summary_csv(t) == "quantity,label,t,median,lower,upper,level\nrmst,\"a, b\",5,1,0.5,1.5,0.95\n");
    const auto j = nlohmann::json::parse(summary_json(t));
    CHECK(j[0]["label"] == "a, b");
    CHECK(j[0]["upper"] == 1.5);
}

TEST_CASE("configuration parsing") {
    TempDir tmp;
    SUBCASE("defaults and echo round trip") {
        const auto cfg = parse_config(R"({"data": {"individual": "x.csv"}})", "c.json", tmp.path);
        CHECK(cfg.data.individual == (tmp.path / "x.csv").lexically_normal().string());
        CHECK(cfg.sampler.chains == 4);
        CHECK(cfg.priors.log_eta0.scale == 20.0);
        CHECK(cfg.priors.sigma.shape == 2.0);
        CHECK(cfg.output.level == 0.95);
        const auto echo = config_echo(cfg);
        const auto again = parse_config(echo, "echo.json", "/elsewhere");
        CHECK(config_echo(again) == echo);
    }
    SUBCASE("full configuration round trip") {
        const auto cfg = parse_config(R"({
            "data": {"individual": "/d/i.csv", "external": "/d/e.csv", "background": "/d/b.csv"},
            "covariates": ["trt", "age"], "treatment": "trt",
            "model": {"cure": true, "additive": true, "nonprop": true},
            "knots": {"n_basis": 7, "extra": [8.5], "upper": 20, "smooth_boundary": false},
            "priors": {"log_eta0": {"location": 1, "scale": 2}, "loghr": [{"location": 0, "scale": 1}, {"location": 0, "scale": 3}],
                       "sigma": {"shape": 2.4, "rate": 7.9}, "tau": {"shape": 3, "rate": 2}, "cure": {"a": 3, "b": 7}},
            "sampler": {"chains": 3, "warmup": 10, "iterations": 20, "seed": 99, "algorithm": "rwm"},
            "output": {"waning": [{"t_min": 5, "t_max": 6}], "patterns": [{"label": "old", "values": {"age": 70}}],
                       "quantities": ["rmst"], "level": 0.8},
            "prior_sim": {"n_sims": 100, "calibrate_sigma": {"median": 2, "upper": 16},
                          "calibrate_scale": {"mean": 3, "low": 1, "high": 9}}
        })", "c.json", tmp.path);
        CHECK(cfg.priors.loghr.size() == 2);
        CHECK(cfg.priors.tau.size() == 1);
        CHECK(cfg.sampler.algorithm == Algorithm::rwm);
        CHECK(cfg.output.patterns[0].values.at("age") == 70.0);
        const auto echo = config_echo(cfg);
        CHECK(config_echo(parse_config(echo, "echo.json", tmp.path)) == echo);
    }
    SUBCASE("schema errors carry the line of the offending key") {
        auto line_of = [&](const std::string& text) -> std::size_t {
            try {
                (void)parse_config(text, "c.json", tmp.path);
            } catch (const InputError& e) {
                return e.line();
            }
            return 0;
        };
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n \"sampler\": {\n  \"chains\": \"four\"\n }\n}") == 4);
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n \"samplr\": {}\n}") == 3);
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n \"output\": {\"times\": [1,\n 2,\n \"x\"]}\n}") == 5);
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n\n \"model\": {\"additive\": true}\n}") == 4);
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n \"level\": 0.9,,\n}") == 3);
        CHECK(line_of("{\n \"data\": {\"individual\": \"x\"},\n \"treatment\": \"trt\"\n}") == 3);
        CHECK(line_of("{\n \"knots\": {\"upper\": 5},\n \"output\": {\n  \"level\": 1.5\n }\n}") == 4);
    }
    SUBCASE("additive without background names the missing input") {
        try {
            (void)parse_config(R"({"data": {"individual": "x"}, "model": {"additive": true}})", "c.json", tmp.path);
            FAIL("expected an error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("data.background") != std::string::npos);
        }
    }
}

TEST_CASE("fit, summarise and loo") {
    TempDir tmp;
    write_individual(tmp.path / "ind.csv", 150, 5);
    write_text(tmp.path / "ext.csv", "start,stop,n,r,trt\n5,10,100,50,0\n10,15,100,40,0\n");
    const auto cfg_path = write_config(tmp.path, "fit.json", kFitConfig);
    std::ostringstream log;
    const auto res = cli::cmd_fit(cfg_path, log);

    for (const char* f : {"config.json", "model.json", "diagnostics.json", "summaries.csv", "summaries.json",
                          "curves.csv", "loo.json", "draws.csv", "loglik.csv"})
        CHECK_MESSAGE(fs::exists(res / f), f);

    SUBCASE("the config echo is the effective configuration") {
        const auto echo = read(res / "config.json");
        CHECK(echo == config_echo(load_config(cfg_path)));
    }
    SUBCASE("summaries cover the requested quantities") {
        const auto t = read_csv(res / "summaries.csv");
        std::map<std::string, int> count;
        for (const auto& r : t.rows) ++count[r[0]];
        CHECK(count["survival"] == 8);  // 4 times, 2 patterns
        CHECK(count["hazard"] == 8);
        CHECK(count["rmst"] == 4);
        CHECK(count["irmst"] == 2);
        CHECK(count["median_survival"] == 2);
        const auto d = nlohmann::json::parse(read(res / "diagnostics.json"));
        CHECK(d["n_draws"] == 400);
        CHECK(d["seed"] == 11);
        CHECK(d.contains("version"));
        CHECK(d["parameters"].size() == 9);  // eta0, p[1..6], sigma, loghr
        const auto l = nlohmann::json::parse(read(res / "loo.json"));
        CHECK(l["n_observations"] == 152);
        CHECK(std::isfinite(l["looic"].get<double>()));
    }
    SUBCASE("summarise reproduces the fit-time summaries bit for bit") {
        cli::cmd_summarise(res, {}, "again", log);
        CHECK(read(res / "again.csv") == read(res / "summaries.csv"));
        CHECK(read(res / "again.json") == read(res / "summaries.json"));
    }
    SUBCASE("targeted requests") {
        cli::cmd_summarise(res, {{5, 20, 40}, {}, std::nullopt}, "h", log);
        const auto t = read_csv(res / "h.csv");
        std::map<std::string, int> rows;
        for (const auto& r : t.rows) ++rows[r[0] + "/" + r[1]];
        CHECK(rows["rmst/control"] == 3);
        CHECK(rows["rmst/treated"] == 3);
        CHECK(rows["irmst/treated - control"] == 3);

        cli::cmd_summarise(res, {{}, {{5, 6}, {5, 20}}, std::nullopt}, "w", log);
        const auto w = read_csv(res / "w.csv");
        std::map<std::string, int> labels;
        for (const auto& r : w.rows) ++labels[r[1]];
        CHECK(labels.size() == 3);
        CHECK(labels["treated - control"] == 2);
        CHECK(labels["treated - control, waning 5 to 6"] == 2);
        CHECK(labels["treated - control, waning 5 to 20"] == 2);

        cli::cmd_summarise(res, {{10}, {}, 0.8}, "l80", log);
        cli::cmd_summarise(res, {{10}, {}, 0.95}, "l95", log);
        const auto a = read_csv(res / "l80.csv"), b = read_csv(res / "l95.csv");
        for (std::size_t i = 0; i < a.rows.size(); ++i)
            CHECK(std::stod(a.rows[i][5]) - std::stod(a.rows[i][4]) < std::stod(b.rows[i][5]) - std::stod(b.rows[i][4]));
    }
    SUBCASE("loo from persisted log-likelihoods matches the fit") {
        const auto fit_loo = read(res / "loo.json");
        CHECK(cli::cmd_loo(res, log) == fit_loo);
    }
    SUBCASE("same seed gives identical draws") {
        const auto first = read(res / "draws.csv");
        cli::cmd_fit(cfg_path, log);
        CHECK(read(res / "draws.csv") == first);
    }
    SUBCASE("without persistence, summarise and loo ask for a rerun") {
        std::string text = kFitConfig;
        text.replace(text.find("\"save_draws\": true"), 18, "\"save_draws\": false");
        cli::cmd_fit(write_config(tmp.path, "nosave.json", text), log);
        CHECK(!fs::exists(res / "draws.csv"));
        try {
            cli::cmd_summarise(res, {}, "x", log);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("save_draws") != std::string::npos);
        }
        CHECK_THROWS((void)cli::cmd_loo(res, log));
    }
}

TEST_CASE("fit with external rows only") {
    TempDir tmp;
    write_text(tmp.path / "ext.csv", "start,stop,n,r\n5,10,100,50\n10,15,100,40\n");
    const auto cfg = write_config(tmp.path, "c.json", R"({
      "data": {"external": "ext.csv"}, "knots": {"n_basis": 5, "upper": 15},
      "sampler": {"chains": 2, "warmup": 200, "iterations": 200},
      "output": {"dir": "res", "times": [5, 10, 15]}})");
    std::ostringstream log;
    const auto res = cli::cmd_fit(cfg, log);
    const auto t = read_csv(res / "summaries.csv");
    // S(10)/S(5) has posterior median near 0.5.
    double s5 = 0, s10 = 0, s15 = 0;
    for (const auto& r : t.rows)
        if (r[0] == "survival") {
            if (r[2] == "5") s5 = std::stod(r[3]);
            if (r[2] == "10") s10 = std::stod(r[3]);
            if (r[2] == "15") s15 = std::stod(r[3]);
        }
    CHECK(s10 / s5 == doctest::Approx(0.5).epsilon(0.1));
    CHECK(s15 / s10 == doctest::Approx(0.4).epsilon(0.12));
}

TEST_CASE("fit preconditions") {
    TempDir tmp;
    write_individual(tmp.path / "ind.csv", 30, 2);
    std::ostringstream log;
    try {
        cli::cmd_fit(write_config(tmp.path, "a.json", R"({"data": {"individual": "ind.csv"}, "model": {"additive": true}})"), log);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("background") != std::string::npos);
    }
    CHECK_THROWS(cli::cmd_fit(write_config(tmp.path, "b.json", R"({"knots": {"upper": 5}})"), log));
    CHECK_THROWS(cli::cmd_fit(write_config(tmp.path, "c.json", R"({"data": {"individual": "missing.csv"}})"), log));
    CHECK_THROWS(cli::cmd_fit(
        write_config(tmp.path, "d.json", R"({"data": {"individual": "ind.csv"}, "covariates": ["trt", "age"]})"), log));
}

TEST_CASE("prior simulation") {
    TempDir tmp;
    std::ostringstream log;
    SUBCASE("deterministic given the seed") {
        const auto cfg = write_config(tmp.path, "p.json", R"({"knots": {"n_basis": 6, "upper": 10}, "prior_sim": {"n_sims": 500}})");
        CHECK(cli::cmd_prior_sim(cfg, log) == cli::cmd_prior_sim(cfg, log));
        CHECK(fs::exists(tmp.path / "results" / "prior_sim.json"));
    }
    SUBCASE("sigma near zero gives rho near one") {
        const auto cfg = write_config(tmp.path, "p.json",
                                      R"({"knots": {"n_basis": 6, "upper": 10}, "priors": {"sigma": {"shape": 2, "rate": 1e5}},
                                          "prior_sim": {"n_sims": 500}})");
        const auto j = nlohmann::json::parse(cli::cmd_prior_sim(cfg, log));
        CHECK(j["rho"]["median"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("calibration targets are reported") {
        const auto cfg = write_config(tmp.path, "p.json",
                                      R"({"knots": {"n_basis": 6, "upper": 10},
                                          "prior_sim": {"n_sims": 1000, "calibrate_sigma": {"median": 2, "upper": 16},
                                                        "calibrate_scale": {"mean": 5, "low": 2, "high": 12}}})");
        const auto j = nlohmann::json::parse(cli::cmd_prior_sim(cfg, log));
        CHECK(j["calibrate_sigma"]["median_rho"].get<double>() == doctest::Approx(2.0).epsilon(0.1));
        CHECK(j["calibrate_scale"]["scale"].get<double>() > 0.0);
    }
    SUBCASE("missing knots") {
        const auto cfg = write_config(tmp.path, "p.json", R"({"prior_sim": {"n_sims": 100}})");
        CHECK_THROWS(cli::cmd_prior_sim(cfg, log));
    }
}

TEST_CASE("command line") {
    TempDir tmp;
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "hazspline");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return cli::run(static_cast<int>(argv.size()), argv.data());
    };
    CHECK(run({}) != 0);
    CHECK(run({"fit"}) != 0);
    CHECK(run({"fit", (tmp.path / "none.json").string()}) != 0);
    write_text(tmp.path / "bad.json", "{\n \"knots\": {\"n_basis\": 2}\n}\n");
    CHECK(run({"-q", "prior-sim", (tmp.path / "bad.json").string()}) == 1);
    CHECK(run({"-q", "summarise", tmp.path.string()}) == 1);
    CHECK(run({"summarise", tmp.path.string(), "--waning", "5"}) != 0);
}
