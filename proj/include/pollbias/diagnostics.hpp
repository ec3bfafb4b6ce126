#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pollbias::diagnostics {

/// Draws of one scalar, one inner vector per chain (equal lengths).
using ChainDraws = std::vector<std::vector<double>>;

/// Potential scale reduction on split chains (each chain halved; the middle
/// draw is dropped when the length is odd). NaN if within-chain variance is 0.
double split_rhat(const ChainDraws& chains);

/// Effective sample size with Geyer's initial monotone sequence estimator,
/// computed on split chains.
double split_ess(const ChainDraws& chains);

/// Split ESS after pooled rank normalization (bulk ESS).
double bulk_ess(const ChainDraws& chains);

/// Rank-normalized z-scores of the pooled draws (average ranks for ties),
/// returned in the same chain layout.
ChainDraws rank_normalize(const ChainDraws& chains);

/// Convergence threshold for the run-level flag.
inline constexpr double kRhatThreshold = 1.05;

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 0.0;  // NaN when omitted
  double ess_bulk = 0.0;
};

struct Report {
  std::vector<ParameterDiagnostics> parameters;
  double max_rhat = 0.0;
  double min_ess_bulk = 0.0;
  bool converged = true;  // every reported R-hat <= kRhatThreshold
  std::vector<std::string> warnings;
};

/// `draws[c][s][k]`: chain c, iteration s, parameter k. Needs >= 4 draws per
/// chain; with one chain R-hat is omitted and a warning recorded.
Report summarize(const std::vector<std::vector<std::vector<double>>>& draws,
                 const std::vector<std::string>& names);

}  // namespace pollbias::diagnostics
