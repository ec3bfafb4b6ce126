#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "pollbias/diagnostics.hpp"
#include "pollbias/parameters.hpp"
#include "pollbias/posterior.hpp"
#include "pollbias/sampler.hpp"

namespace pollbias {

struct ChainStats {
  double step_size = 0.0;
  std::size_t divergences = 0;
  std::size_t treedepth_hits = 0;
  std::size_t leapfrog_steps = 0;
  double mean_accept_stat = 0.0;
};

/// Post-warmup draws on the constrained scale, in ParameterLayout order.
/// Rows are chain-major: row(c, s) = rows[c * samples + s].
struct PosteriorDraws {
  std::vector<std::string> names;
  std::size_t chains = 0;
  std::size_t samples = 0;
  std::vector<std::vector<double>> rows;
  std::vector<ChainStats> chain_stats;
  diagnostics::Report diagnostics;
  bool unreliable = false;

  std::size_t size() const { return rows.size(); }
  const std::vector<double>& row(std::size_t chain, std::size_t sample) const {
    return rows[chain * samples + sample];
  }
  std::size_t column(const std::string& name) const;
  /// Column `k` split by chain, for diagnostics.
  diagnostics::ChainDraws by_chain(std::size_t k) const;
};

/// Runs NUTS on the model and maps draws back to the constrained scale.
PosteriorDraws fit_posterior(const PosteriorModel& model, const SamplerConfig& config);

/// Recomputes the per-parameter diagnostics stored in `draws`.
void compute_diagnostics(PosteriorDraws& draws);

/// Flat CSV: chain, iteration, then one column per parameter name.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path);

nlohmann::json diagnostics_json(const PosteriorDraws& draws);

/// Maps each row to a ParameterSet; throws if the names do not match the layout.
std::vector<ParameterSet> to_parameter_sets(const PosteriorDraws& draws,
                                            const ParameterLayout& layout);

}  // namespace pollbias
