#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pollbias/posterior.hpp"

namespace pollbias {

/// A differentiable log density over R^n. `evaluate` writes the gradient
/// and may flag points outside the numerical support as rejected.
struct LogDensity {
  std::size_t dimension = 0;
  std::function<DensityEval(std::span<const double>, std::span<double>)> evaluate;
  /// Optional. Defaults to uniform [-0.5, 0.5] per coordinate.
  std::function<std::vector<double>(std::mt19937_64&)> initialize;
};

LogDensity as_log_density(const PosteriorModel& model);

enum class MassMatrix { Identity, AdaptedDiagonal };

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t warmup = 1000;
  std::size_t samples = 1000;
  double target_accept = 0.8;
  std::size_t max_treedepth = 10;
  std::uint64_t seed = 20161108;
  MassMatrix mass_matrix = MassMatrix::AdaptedDiagonal;
  /// Worker threads for chains; 0 reads POLLBIAS_THREADS, else one per chain.
  std::size_t threads = 0;
  bool check_gradient = true;

  void validate() const;
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Energy error (in log-density units) beyond which a transition is divergent.
inline constexpr double kDivergenceThreshold = 1000.0;
/// Share of divergent post-warmup transitions that marks a run unreliable.
inline constexpr double kUnreliableDivergenceRate = 0.10;

struct ChainResult {
  std::vector<std::vector<double>> draws;  // unconstrained, one per iteration
  double step_size = 0.0;
  std::vector<double> inverse_metric;
  std::size_t divergences = 0;
  std::size_t treedepth_hits = 0;
  std::size_t leapfrog_steps = 0;
  double mean_accept_stat = 0.0;
  std::vector<std::size_t> treedepths;
};

struct SamplerRun {
  std::vector<ChainResult> chains;
  bool unreliable = false;
  std::size_t total_divergences() const;
};

/// Multinomial No-U-Turn sampler with dual-averaging step size and windowed
/// diagonal metric adaptation. Chain c draws from an RNG seeded by
/// (seed, c) so results do not depend on thread scheduling.
SamplerRun run_nuts(const LogDensity& target, const SamplerConfig& config);

/// Largest per-coordinate relative discrepancy between the gradient and a
/// central difference with step h: |g - fd| / max(1, |g|, |fd|).
double gradient_check(const LogDensity& target, std::span<const double> x, double h = 1e-5);

namespace hmc {

struct PhasePoint {
  std::vector<double> q, p, grad;
  double log_density = 0.0;
  bool rejected = false;
};

/// One leapfrog step of size eps under a diagonal inverse metric.
void leapfrog(const LogDensity& target, std::span<const double> inverse_metric, PhasePoint& z,
              double eps);
double hamiltonian(std::span<const double> inverse_metric, const PhasePoint& z);

}  // namespace hmc

std::size_t threads_from_environment(std::size_t fallback);

}  // namespace pollbias
