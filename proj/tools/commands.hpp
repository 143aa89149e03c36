#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hazspline/config.hpp"
#include "hazspline/outputs.hpp"

namespace hazspline::cli {

/// Model structure, data and prediction patterns derived from a configuration.
struct ModelSetup {
    ModelSpec spec;
    Dataset data;
    std::vector<CovariatePattern> patterns;
    /// Treated and control patterns when a treatment column is configured.
    std::optional<std::pair<CovariatePattern, CovariatePattern>> contrast;
    std::vector<std::string> warnings;
};

ModelSetup prepare_model(const RunConfig& cfg);

/// Everything `summarise` needs from a results directory besides draws.
struct StoredModel {
    RunConfig config;
    ModelSpec spec;
    std::vector<CovariatePattern> patterns;
    std::optional<std::pair<CovariatePattern, CovariatePattern>> contrast;
};

StoredModel load_results(const std::filesystem::path& dir);

struct SummaryRequest {
    std::vector<double> rmst_horizons;   ///< empty: configured horizons
    std::vector<WaningScenario> waning;  ///< empty: configured scenarios
    std::optional<double> level;         ///< empty: configured level
};

/// Summary tables requested by the configuration, or by `request` when it overrides.
SummaryTable compute_summaries(const RunConfig& cfg, const ModelSpec& spec, const std::vector<CovariatePattern>& patterns,
                               const std::optional<std::pair<CovariatePattern, CovariatePattern>>& contrast,
                               const Predictor& pred, const SummaryRequest& request = {});

/// Survival and hazard on the plot grid for each pattern.
SummaryTable compute_curves(const RunConfig& cfg, const ModelSpec& spec, const std::vector<CovariatePattern>& patterns,
                            const Predictor& pred);

/// Fit and write the results directory; returns the directory.
std::filesystem::path cmd_fit(const std::filesystem::path& config_path, std::ostream& log);
/// Prior simulation of rho and mean survival; writes prior_sim.json to the output directory.
std::string cmd_prior_sim(const std::filesystem::path& config_path, std::ostream& log);
/// Recompute summaries from persisted draws; writes <out>.csv and <out>.json inside the results directory.
std::filesystem::path cmd_summarise(const std::filesystem::path& results, const SummaryRequest& request,
                                    const std::string& out_name, std::ostream& log);
/// Recompute LOO from persisted pointwise log-likelihoods; returns the JSON written to loo.json.
std::string cmd_loo(const std::filesystem::path& results, std::ostream& log);

/// Command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace hazspline::cli
