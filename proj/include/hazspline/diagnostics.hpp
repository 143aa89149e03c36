#pragma once

#include <string>
#include <vector>

#include "hazspline/sampler.hpp"

namespace hazspline {

using ChainValues = std::vector<std::vector<double>>;

/// Split potential scale reduction factor; NaN with fewer than two half-chains of length >= 2.
double split_rhat(const ChainValues& chains);

/// Effective sample size across chains, from within-chain autocorrelations
/// truncated by Geyer's initial monotone sequence.
double effective_sample_size(const ChainValues& chains);

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double median = 0.0;
    double q975 = 0.0;
    double rhat = 0.0;  ///< NaN when omitted
    double ess = 0.0;
};

struct Diagnostics {
    std::vector<ParameterSummary> parameters;
    std::size_t divergences = 0;
    double divergence_rate = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] double max_rhat() const;
    [[nodiscard]] double min_ess() const;
};

Diagnostics diagnose(const PosteriorDraws& draws);

}  // namespace hazspline
