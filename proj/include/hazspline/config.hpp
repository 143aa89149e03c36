#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hazspline/evidence.hpp"
#include "hazspline/sampler.hpp"

namespace hazspline {

struct DataPaths {
    std::string individual;  ///< empty when absent
    std::string external;
    std::string background;
};

struct ModelFlags {
    bool cure = false;
    bool additive = false;
    bool nonprop = false;
};

struct KnotConfig {
    int n_basis = 10;
    std::vector<double> extra;
    std::optional<double> upper;
    /// Explicit internal knots; when set, quantile placement is skipped and `upper` is required.
    std::optional<std::vector<double>> internal;
    bool smooth_boundary = true;
};

struct PatternConfig {
    std::string label;
    std::map<std::string, double> values;  ///< covariates not listed take their data mean
};

struct WaningScenario {
    double t_min = 0.0;
    double t_max = 0.0;
};

struct OutputConfig {
    std::string dir = "results";
    bool save_draws = false;
    std::vector<std::string> quantities{"survival", "hazard", "rmst", "irmst", "median"};
    std::vector<double> times;          ///< empty: `grid_points` equally spaced times on [0, U]
    std::size_t grid_points = 21;
    std::vector<double> rmst_horizons;  ///< empty: U
    std::vector<WaningScenario> waning;
    double level = 0.95;
    std::vector<PatternConfig> patterns;  ///< empty: derived from the treatment column
    std::size_t curve_points = 101;       ///< plot grid on [0, 2U]
};

struct RhoTarget {
    double median = 2.0;
    double upper = 16.0;
};

struct MeanSurvivalTarget {
    double mean = 1.0;
    double low = 0.5;
    double high = 2.0;
};

struct PriorSimConfig {
    std::size_t n_sims = 5000;
    std::size_t grid = 100;
    std::optional<RhoTarget> calibrate_sigma;
    std::optional<MeanSurvivalTarget> calibrate_scale;
};

struct RunConfig {
    DataPaths data;
    std::vector<std::string> covariates;
    std::optional<std::string> treatment;
    ModelFlags model;
    KnotConfig knots;
    PriorConfig priors;
    SamplerConfig sampler;
    OutputConfig output;
    PriorSimConfig prior_sim;

    /// Cross-field checks: referenced columns, mechanism prerequisites, value ranges.
    void validate() const;
};

/// Parse a JSON configuration. Relative paths are resolved against `base_dir`.
/// Errors are InputError with the line of the offending key.
RunConfig parse_config(const std::string& text, const std::string& source, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Effective configuration with every default filled in. Parsing the echo
/// gives back the same configuration and the same echo.
std::string config_echo(const RunConfig& cfg);

}  // namespace hazspline
