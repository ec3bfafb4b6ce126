#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pollbias/data_ingest.hpp"

namespace pollbias {

/// Extended: poll model with undecided-allocation bias and house effects.
/// Baseline: the same code path with both terms pinned at zero and removed
/// from the sampled vector.
enum class ModelVariant { Extended, Baseline };

std::string_view to_string(ModelVariant variant);
ModelVariant parse_model_variant(std::string_view text);

/// Undecided share enters the poll predictor multiplied by this factor.
inline constexpr double kUndecidedPredictorScale = 10.0;

/// Every parameter of the joint poll + undecided model.
/// Variances (tau*_sq) and scales (sigma*) are nonnegative.
struct ParameterSet {
  // per race
  std::vector<double> alpha1, beta1, tau1_sq;
  std::vector<double> alpha2, beta2, tau2_sq;
  // per year x margin group
  std::vector<double> gamma;
  // per housed pollster
  std::vector<double> kappa;
  // per year
  std::vector<double> phi;

  double mu1_alpha = 0.0, sigma1_alpha = 0.1;
  double mu1_beta = 0.0, sigma1_beta = 0.1;
  double sigma1_tau = 0.03;
  double mu_kappa = 0.0, sigma_kappa = 0.03;
  double sigma2_alpha = 0.01;
  double mu2_beta = 0.0, sigma2_beta = 0.01;
  double sigma2_tau = 0.005;
};

/// Coordinate map between ParameterSet and a flat vector. The flat order is
/// the same for constrained draws and unconstrained sampler coordinates;
/// nonnegative fields are log-transformed in the unconstrained space.
class ParameterLayout {
 public:
  struct Block {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool positive = false;
    const std::vector<std::string>* labels = nullptr;  // null for scalars
  };

  ParameterLayout() = default;
  ParameterLayout(std::vector<std::string> race_labels, std::vector<std::string> group_labels,
                  std::vector<std::string> house_labels, std::vector<std::string> year_labels,
                  std::vector<std::size_t> race_year, ModelVariant variant);
  static ParameterLayout for_dataset(const PreparedDataset& data,
                                     ModelVariant variant = ModelVariant::Extended);

  ParameterLayout(const ParameterLayout& other) { *this = other; }
  ParameterLayout& operator=(const ParameterLayout& other);

  std::size_t dimension() const { return dimension_; }
  std::size_t races() const { return race_labels_.size(); }
  std::size_t groups() const { return group_labels_.size(); }
  std::size_t houses() const { return house_labels_.size(); }
  std::size_t years() const { return year_labels_.size(); }
  ModelVariant variant() const { return variant_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::size_t>& race_year() const { return race_year_; }
  const Block& block(std::string_view name) const;

  /// Column names such as "alpha1[AZ-2016]", "gamma[2016-Close]", "mu1_alpha".
  std::vector<std::string> names() const;

  /// A ParameterSet of the right shape, every location zero and every
  /// scale at its default.
  ParameterSet zeros() const;

  std::vector<double> to_flat(const ParameterSet& p) const;
  ParameterSet from_flat(std::span<const double> flat) const;
  std::vector<double> to_unconstrained(const ParameterSet& p) const;
  ParameterSet from_unconstrained(std::span<const double> x) const;

  /// Throws std::invalid_argument if p does not match this layout.
  void check_shape(const ParameterSet& p) const;

 private:
  void build();

  std::vector<std::string> race_labels_, group_labels_, house_labels_, year_labels_;
  std::vector<std::size_t> race_year_;
  ModelVariant variant_ = ModelVariant::Extended;
  std::vector<Block> blocks_;
  std::size_t dimension_ = 0;
};

/// Visits every field of `p` as (block name, values) in layout order,
/// including fields a Baseline layout does not sample.
template <typename Params, typename F>
void for_each_field(Params& p, F&& f) {
  f("alpha1", std::span(p.alpha1));
  f("beta1", std::span(p.beta1));
  f("tau1_sq", std::span(p.tau1_sq));
  f("alpha2", std::span(p.alpha2));
  f("beta2", std::span(p.beta2));
  f("tau2_sq", std::span(p.tau2_sq));
  f("gamma", std::span(p.gamma));
  f("kappa", std::span(p.kappa));
  f("phi", std::span(p.phi));
  f("mu1_alpha", std::span(&p.mu1_alpha, 1));
  f("sigma1_alpha", std::span(&p.sigma1_alpha, 1));
  f("mu1_beta", std::span(&p.mu1_beta, 1));
  f("sigma1_beta", std::span(&p.sigma1_beta, 1));
  f("sigma1_tau", std::span(&p.sigma1_tau, 1));
  f("mu_kappa", std::span(&p.mu_kappa, 1));
  f("sigma_kappa", std::span(&p.sigma_kappa, 1));
  f("sigma2_alpha", std::span(&p.sigma2_alpha, 1));
  f("mu2_beta", std::span(&p.mu2_beta, 1));
  f("sigma2_beta", std::span(&p.sigma2_beta, 1));
  f("sigma2_tau", std::span(&p.sigma2_tau, 1));
}

}  // namespace pollbias
