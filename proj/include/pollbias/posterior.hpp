#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pollbias/data_ingest.hpp"
#include "pollbias/parameters.hpp"

namespace pollbias {

/// Prior scales. Normal and half-normal second arguments are standard
/// deviations; sigma_kappa is exponential with the given mean.
struct PriorConfig {
  double mu1_alpha_sd = 0.2;
  double sigma1_alpha_scale = 0.2;
  double mu1_beta_sd = 0.2;
  double sigma1_beta_scale = 0.2;
  double sigma1_tau_scale = 0.05;
  double gamma_scale = 0.05;
  double mu_kappa_sd = 0.05;
  double sigma_kappa_mean = 0.05;
  double phi_mean = 0.04;
  double phi_sd = 0.01;
  double sigma2_alpha_scale = 0.02;
  double mu2_beta_sd = 0.02;
  double sigma2_beta_scale = 0.02;
  double sigma2_tau_scale = 0.01;

  void validate() const;
};

/// Undecided-model variances are floored here before use.
inline constexpr double kVarianceFloor = 1e-10;
/// Value reported for parameters outside the model's numerical support.
inline constexpr double kRejectedLogDensity = -1e300;

class PredictorOverflow : public std::runtime_error {
 public:
  PredictorOverflow() : std::runtime_error("linear predictor overflow") {}
};

namespace density {
double normal_lpdf(double x, double mean, double sd);
double half_normal_lpdf(double x, double sd);
double laplace_lpdf(double x, double location, double scale);
double exponential_lpdf(double x, double rate);
}  // namespace density

double logit(double p);
double inv_logit(double x);

/// Logit-scale predictor of poll i's expected Republican share under the
/// extended model.
double poll_linear_predictor(const ParameterSet& params, const PreparedDataset& data,
                             std::size_t i);

/// Sum of log N(y_i | p_i, p_i(1-p_i)/n_i + tau1_sq[r]) with the extended
/// predictor. Throws PredictorOverflow when p_i rounds to 0 or 1.
double log_likelihood_polls(const ParameterSet& params, const PreparedDataset& data);

/// The same likelihood with only election-day bias and time trend in the
/// predictor. Coded separately from log_likelihood_polls.
double log_likelihood_polls_baseline(const ParameterSet& params, const PreparedDataset& data);

/// Sum over polls reporting undecideds of log N(u_i | alpha2 + t beta2, tau2_sq).
double log_likelihood_undecided(const ParameterSet& params, const PreparedDataset& data);

/// Joint log prior on the constrained scale. Needs race->year map for phi.
double log_prior(const ParameterSet& params, std::span<const std::size_t> race_year,
                 const PriorConfig& priors = {}, ModelVariant variant = ModelVariant::Extended);

/// Which parts of the joint density to include. Tests switch terms off.
struct PosteriorTerms {
  bool polls = true;
  bool undecided = true;
  bool prior = true;
};

struct DensityEval {
  double log_density = 0.0;
  bool rejected = false;
};

/// Joint log posterior over unconstrained coordinates, with its exact
/// gradient. Owns a compact copy of the dataset; evaluation is const and
/// allocation-free, so one instance can serve concurrent chains.
class PosteriorModel {
 public:
  explicit PosteriorModel(const PreparedDataset& data, PriorConfig priors = {},
                          ModelVariant variant = ModelVariant::Extended,
                          PosteriorTerms terms = {});

  const ParameterLayout& layout() const { return layout_; }
  std::size_t dimension() const { return layout_.dimension(); }
  const PriorConfig& priors() const { return priors_; }

  /// Writes the gradient into `grad` (size dimension()). Non-finite x throws
  /// std::invalid_argument; numerical overflow of the predictor returns
  /// kRejectedLogDensity with rejected=true and a zero gradient.
  DensityEval log_posterior_and_grad(std::span<const double> x, std::span<double> grad) const;
  double log_posterior(std::span<const double> x) const;

  /// Locations uniform in [-0.5, 0.5]; nonnegative parameters at
  /// log(prior median) plus the same jitter.
  std::vector<double> initial_point(std::mt19937_64& rng) const;

 private:
  struct Obs {
    double y, t, n, logit_v, u;
    std::size_t race, group;
    std::ptrdiff_t house;  // -1 if unhoused
    bool has_u;
  };

  ParameterLayout layout_;
  PriorConfig priors_;
  ModelVariant variant_;
  PosteriorTerms terms_;
  std::vector<Obs> obs_;
  std::vector<std::size_t> race_year_;
};

}  // namespace pollbias
