#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hazspline/evidence.hpp"

namespace hazspline {

enum class Algorithm { nuts, rwm };

struct SamplerConfig {
    std::size_t chains = 4;
    std::size_t warmup = 1000;
    std::size_t iterations = 1000;
    std::uint64_t seed = 1;
    double target_accept = 0.9;
    int max_depth = 10;
    Algorithm algorithm = Algorithm::nuts;
    std::size_t threads = 0;  ///< 0: HAZSPLINE_THREADS or the hardware count
    std::size_t init_attempts = 100;

    void validate() const;
};

/// Log density and its gradient; returns -inf outside the support.
using LogDensity = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct ChainStats {
    double step_size = 0.0;
    double mean_accept = 0.0;
    std::size_t divergences = 0;
    std::size_t max_depth_hits = 0;
    std::size_t gradient_evals = 0;
    Eigen::VectorXd inv_metric;
};

struct ChainResult {
    Eigen::MatrixXd draws;  ///< iterations x dim, unconstrained
    ChainStats stats;
};

/// Multinomial no-U-turn sampler with dual-averaging step size and windowed
/// diagonal metric adaptation during warmup.
ChainResult run_nuts(const LogDensity& target, Eigen::VectorXd init, std::size_t warmup, std::size_t iterations,
                     double target_accept, int max_depth, std::mt19937_64& rng);

/// Random-walk Metropolis with a diagonal proposal scaled to the warmup variance.
ChainResult run_rwm(const LogDensity& target, Eigen::VectorXd init, std::size_t warmup, std::size_t iterations,
                    std::mt19937_64& rng);

struct PosteriorDraws {
    std::vector<std::string> names;
    Eigen::MatrixXd draws;    ///< n_draws x constrained parameters
    Eigen::MatrixXd loglik;   ///< n_draws x observations
    std::vector<int> chain;   ///< chain index per draw
    std::size_t n_chains = 0;
    std::vector<ChainStats> stats;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
};

/// Per-chain generator derived from the run seed and the chain index.
std::mt19937_64 chain_rng(std::uint64_t seed, std::size_t chain);

/// Worker threads for a run: explicit value, else HAZSPLINE_THREADS, else the hardware count.
std::size_t thread_count(std::size_t requested);

PosteriorDraws sample_posterior(const SurvivalModel& model, const SamplerConfig& config);

}  // namespace hazspline
