#include "pollbias/posterior.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pollbias {

void PriorConfig::validate() const {
  for (double s : {mu1_alpha_sd, sigma1_alpha_scale, mu1_beta_sd, sigma1_beta_scale,
                   sigma1_tau_scale, gamma_scale, mu_kappa_sd, sigma_kappa_mean, phi_sd,
                   sigma2_alpha_scale, mu2_beta_sd, sigma2_beta_scale, sigma2_tau_scale}) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("prior scales must be positive and finite");
  }
  if (!std::isfinite(phi_mean)) throw std::invalid_argument("phi_mean must be finite");
}

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2 pi) / 2
constexpr double kLog2 = std::numbers::ln2;
}  // namespace

namespace density {

double normal_lpdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) throw std::domain_error("normal scale must be positive");
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

double half_normal_lpdf(double x, double sd) {
  if (x < 0.0) throw std::domain_error("half-normal variate must be nonnegative");
  return kLog2 + normal_lpdf(x, 0.0, sd);
}

double laplace_lpdf(double x, double location, double scale) {
  if (!(scale > 0.0)) throw std::domain_error("Laplace scale must be positive");
  return -std::log(2.0 * scale) - std::abs(x - location) / scale;
}

double exponential_lpdf(double x, double rate) {
  if (!(rate > 0.0)) throw std::domain_error("exponential rate must be positive");
  if (x < 0.0) throw std::domain_error("exponential variate must be nonnegative");
  return std::log(rate) - rate * x;
}

}  // namespace density

double logit(double p) { return std::log(p / (1.0 - p)); }

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

struct Fields {
  std::span<const double> alpha1, beta1, tau1_sq, alpha2, beta2, tau2_sq, gamma, kappa, phi;
  double mu1_alpha, sigma1_alpha, mu1_beta, sigma1_beta, sigma1_tau, mu_kappa, sigma_kappa,
      sigma2_alpha, mu2_beta, sigma2_beta, sigma2_tau;
};

struct Grads {
  std::span<double> alpha1, beta1, tau1_sq, alpha2, beta2, tau2_sq, gamma, kappa, phi;
  double *mu1_alpha, *sigma1_alpha, *mu1_beta, *sigma1_beta, *sigma1_tau, *mu_kappa, *sigma_kappa,
      *sigma2_alpha, *mu2_beta, *sigma2_beta, *sigma2_tau;
};

Fields fields_of(const ParameterSet& p) {
  return {p.alpha1,      p.beta1,        p.tau1_sq,    p.alpha2,   p.beta2,     p.tau2_sq,
          p.gamma,       p.kappa,        p.phi,        p.mu1_alpha, p.sigma1_alpha, p.mu1_beta,
          p.sigma1_beta, p.sigma1_tau,   p.mu_kappa,   p.sigma_kappa, p.sigma2_alpha, p.mu2_beta,
          p.sigma2_beta, p.sigma2_tau};
}

struct Obs {
  double y, t, n, logit_v, u;
  std::size_t race, group;
  std::ptrdiff_t house;
  bool has_u;
};

Obs obs_of(const PreparedDataset& data, std::size_t i) {
  const PreparedPoll& p = data.polls[i];
  return {p.y,
          p.t,
          static_cast<double>(p.source.sample_size),
          logit(data.races[p.race].two_party_outcome),
          p.u.value_or(0.0),
          p.race,
          data.race_group[p.race],
          p.house ? static_cast<std::ptrdiff_t>(*p.house) : -1,
          p.u.has_value()};
}

// Log-likelihood of one poll under the extended predictor; accumulates
// d/d(constrained) into g when non-null. Returns false on overflow.
template <typename ObsT>
bool poll_term(const ObsT& o, const Fields& f, Grads* g, double& ll) {
  const std::size_t r = o.race;
  const double kap = o.house >= 0 ? f.kappa[static_cast<std::size_t>(o.house)] : 0.0;
  const double gam = f.gamma[o.group];
  const double eta = o.logit_v + f.alpha1[r] + o.t * f.beta1[r] -
                     kUndecidedPredictorScale * f.alpha2[r] * gam + kap;
  const double p = inv_logit(eta);
  if (!(p > 0.0 && p < 1.0)) return false;
  const double q = p * (1.0 - p);
  const double s2 = q / o.n + f.tau1_sq[r];
  const double resid = o.y - p;
  ll += -kHalfLog2Pi - 0.5 * std::log(s2) - resid * resid / (2.0 * s2);
  if (g) {
    const double dll_ds2 = -0.5 / s2 + resid * resid / (2.0 * s2 * s2);
    const double dll_dp = resid / s2 + dll_ds2 * (1.0 - 2.0 * p) / o.n;
    const double dll_deta = dll_dp * q;
    g->alpha1[r] += dll_deta;
    g->beta1[r] += o.t * dll_deta;
    g->alpha2[r] -= kUndecidedPredictorScale * gam * dll_deta;
    g->gamma[o.group] -= kUndecidedPredictorScale * f.alpha2[r] * dll_deta;
    if (o.house >= 0) g->kappa[static_cast<std::size_t>(o.house)] += dll_deta;
    g->tau1_sq[r] += dll_ds2;
  }
  return true;
}

template <typename ObsT>
void undecided_term(const ObsT& o, const Fields& f, Grads* g, double& ll) {
  if (!o.has_u) return;
  const std::size_t r = o.race;
  const double mean = f.alpha2[r] + o.t * f.beta2[r];
  const bool floored = f.tau2_sq[r] < kVarianceFloor;
  const double var = floored ? kVarianceFloor : f.tau2_sq[r];
  const double resid = o.u - mean;
  ll += -kHalfLog2Pi - 0.5 * std::log(var) - resid * resid / (2.0 * var);
  if (g) {
    const double dmean = resid / var;
    g->alpha2[r] += dmean;
    g->beta2[r] += o.t * dmean;
    if (!floored) g->tau2_sq[r] += -0.5 / var + resid * resid / (2.0 * var * var);
  }
}

// Normal log density with gradients w.r.t. x, mean and sd.
inline double normal_term(double x, double mean, double sd, double* dx, double* dmean,
                          double* dsd) {
  const double z = (x - mean) / sd;
  if (dx) *dx -= z / sd;
  if (dmean) *dmean += z / sd;
  if (dsd) *dsd += -1.0 / sd + z * z / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

inline double half_normal_term(double x, double sd, double* dx, double* dsd) {
  return kLog2 + normal_term(x, 0.0, sd, dx, nullptr, dsd);
}

double* at(std::span<double> s, std::size_t i) { return s.empty() ? nullptr : &s[i]; }

double prior_terms(const Fields& f, std::span<const std::size_t> race_year, const PriorConfig& pc,
                   ModelVariant variant, Grads* g) {
  const bool grad = g != nullptr;
  double lp = 0.0;
  const std::size_t races = f.alpha1.size();
  for (std::size_t r = 0; r < races; ++r) {
    lp += normal_term(f.alpha1[r], f.mu1_alpha, f.sigma1_alpha, grad ? &g->alpha1[r] : nullptr,
                      grad ? g->mu1_alpha : nullptr, grad ? g->sigma1_alpha : nullptr);
    lp += normal_term(f.beta1[r], f.mu1_beta, f.sigma1_beta, grad ? &g->beta1[r] : nullptr,
                      grad ? g->mu1_beta : nullptr, grad ? g->sigma1_beta : nullptr);
    lp += half_normal_term(f.tau1_sq[r], f.sigma1_tau, grad ? &g->tau1_sq[r] : nullptr,
                           grad ? g->sigma1_tau : nullptr);
    const std::size_t y = race_year[r];
    lp += normal_term(f.alpha2[r], f.phi[y], f.sigma2_alpha, grad ? &g->alpha2[r] : nullptr,
                      grad ? &g->phi[y] : nullptr, grad ? g->sigma2_alpha : nullptr);
    lp += normal_term(f.beta2[r], f.mu2_beta, f.sigma2_beta, grad ? &g->beta2[r] : nullptr,
                      grad ? g->mu2_beta : nullptr, grad ? g->sigma2_beta : nullptr);
    lp += half_normal_term(f.tau2_sq[r], f.sigma2_tau, grad ? &g->tau2_sq[r] : nullptr,
                           grad ? g->sigma2_tau : nullptr);
  }
  lp += normal_term(f.mu1_alpha, 0.0, pc.mu1_alpha_sd, grad ? g->mu1_alpha : nullptr, nullptr,
                    nullptr);
  lp += half_normal_term(f.sigma1_alpha, pc.sigma1_alpha_scale, grad ? g->sigma1_alpha : nullptr,
                         nullptr);
  lp += normal_term(f.mu1_beta, 0.0, pc.mu1_beta_sd, grad ? g->mu1_beta : nullptr, nullptr, nullptr);
  lp += half_normal_term(f.sigma1_beta, pc.sigma1_beta_scale, grad ? g->sigma1_beta : nullptr,
                         nullptr);
  lp += half_normal_term(f.sigma1_tau, pc.sigma1_tau_scale, grad ? g->sigma1_tau : nullptr, nullptr);
  for (std::size_t y = 0; y < f.phi.size(); ++y)
    lp += normal_term(f.phi[y], pc.phi_mean, pc.phi_sd, grad ? at(g->phi, y) : nullptr, nullptr,
                      nullptr);
  lp += half_normal_term(f.sigma2_alpha, pc.sigma2_alpha_scale, grad ? g->sigma2_alpha : nullptr,
                         nullptr);
  lp += normal_term(f.mu2_beta, 0.0, pc.mu2_beta_sd, grad ? g->mu2_beta : nullptr, nullptr, nullptr);
  lp += half_normal_term(f.sigma2_beta, pc.sigma2_beta_scale, grad ? g->sigma2_beta : nullptr,
                         nullptr);
  lp += half_normal_term(f.sigma2_tau, pc.sigma2_tau_scale, grad ? g->sigma2_tau : nullptr, nullptr);

  if (variant == ModelVariant::Extended) {
    const double b = pc.gamma_scale;
    for (std::size_t k = 0; k < f.gamma.size(); ++k) {
      const double x = f.gamma[k];
      lp += -std::log(2.0 * b) - std::abs(x) / b;
      if (grad) g->gamma[k] -= (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0)) / b;
    }
    for (std::size_t h = 0; h < f.kappa.size(); ++h)
      lp += normal_term(f.kappa[h], f.mu_kappa, f.sigma_kappa, grad ? &g->kappa[h] : nullptr,
                        grad ? g->mu_kappa : nullptr, grad ? g->sigma_kappa : nullptr);
    lp += normal_term(f.mu_kappa, 0.0, pc.mu_kappa_sd, grad ? g->mu_kappa : nullptr, nullptr,
                      nullptr);
    const double rate = 1.0 / pc.sigma_kappa_mean;
    lp += std::log(rate) - rate * f.sigma_kappa;
    if (grad) *g->sigma_kappa -= rate;
  }
  return lp;
}

void check_scales(const ParameterSet& p) {
  for (double s : {p.sigma1_alpha, p.sigma1_beta, p.sigma1_tau, p.sigma_kappa, p.sigma2_alpha,
                   p.sigma2_beta, p.sigma2_tau})
    if (!(s > 0.0)) throw std::domain_error("scale parameters must be positive");
  for (const auto* v : {&p.tau1_sq, &p.tau2_sq})
    for (double x : *v)
      if (x < 0.0) throw std::domain_error("variance parameters must be nonnegative");
}

void check_dims(const ParameterSet& p, const PreparedDataset& data) {
  ParameterLayout::for_dataset(data).check_shape(p);
}

}  // namespace

double poll_linear_predictor(const ParameterSet& params, const PreparedDataset& data,
                             std::size_t i) {
  const PreparedPoll& p = data.polls[i];
  const std::size_t r = p.race;
  const double kap = p.house ? params.kappa[*p.house] : 0.0;
  return logit(data.races[r].two_party_outcome) + params.alpha1[r] + p.t * params.beta1[r] -
         kUndecidedPredictorScale * params.alpha2[r] * params.gamma[data.race_group[r]] + kap;
}

double log_likelihood_polls(const ParameterSet& params, const PreparedDataset& data) {
  check_dims(params, data);
  const Fields f = fields_of(params);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.polls.size(); ++i) {
    if (!poll_term(obs_of(data, i), f, nullptr, ll)) throw PredictorOverflow();
  }
  return ll;
}

double log_likelihood_polls_baseline(const ParameterSet& params, const PreparedDataset& data) {
  check_dims(params, data);
  double ll = 0.0;
  for (const PreparedPoll& poll : data.polls) {
    const std::size_t r = poll.race;
    const double eta =
        logit(data.races[r].two_party_outcome) + params.alpha1[r] + poll.t * params.beta1[r];
    const double p = inv_logit(eta);
    if (!(p > 0.0 && p < 1.0)) throw PredictorOverflow();
    const double var = p * (1.0 - p) / static_cast<double>(poll.source.sample_size) +
                       params.tau1_sq[r];
    ll += density::normal_lpdf(poll.y, p, std::sqrt(var));
  }
  return ll;
}

double log_likelihood_undecided(const ParameterSet& params, const PreparedDataset& data) {
  check_dims(params, data);
  const Fields f = fields_of(params);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.polls.size(); ++i)
    undecided_term(obs_of(data, i), f, nullptr, ll);
  return ll;
}

double log_prior(const ParameterSet& params, std::span<const std::size_t> race_year,
                 const PriorConfig& priors, ModelVariant variant) {
  check_scales(params);
  if (race_year.size() != params.alpha1.size())
    throw std::invalid_argument("race_year must have one entry per race");
  return prior_terms(fields_of(params), race_year, priors, variant, nullptr);
}

PosteriorModel::PosteriorModel(const PreparedDataset& data, PriorConfig priors,
                               ModelVariant variant, PosteriorTerms terms)
    : layout_(ParameterLayout::for_dataset(data, variant)),
      priors_(priors),
      variant_(variant),
      terms_(terms),
      race_year_(data.race_year) {
  priors_.validate();
  obs_.reserve(data.polls.size());
  for (std::size_t i = 0; i < data.polls.size(); ++i) {
    const ::pollbias::Obs o = obs_of(data, i);
    obs_.push_back({o.y, o.t, o.n, o.logit_v, o.u, o.race, o.group, o.house, o.has_u});
  }
}

DensityEval PosteriorModel::log_posterior_and_grad(std::span<const double> x,
                                                   std::span<double> grad) const {
  const std::size_t dim = dimension();
  if (x.size() != dim || grad.size() != dim)
    throw std::invalid_argument("log_posterior_and_grad: dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("log_posterior_and_grad: non-finite input");

  std::vector<double> c(x.begin(), x.end());
  double jacobian = 0.0;
  for (const auto& b : layout_.blocks()) {
    if (!b.positive) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      jacobian += x[i];
      c[i] = std::exp(x[i]);
    }
  }
  std::fill(grad.begin(), grad.end(), 0.0);

  const bool extended = variant_ == ModelVariant::Extended;
  std::vector<double> pinned(extended ? 0 : layout_.groups() + layout_.houses(), 0.0);
  std::vector<double> pinned_grad(pinned.size(), 0.0);
  double pinned_scalar_grad[2] = {0.0, 0.0};

  auto span_of = [&](const char* name) -> std::span<const double> {
    const auto& b = layout_.block(name);
    return std::span<const double>(c).subspan(b.offset, b.size);
  };
  auto grad_of = [&](const char* name) -> std::span<double> {
    const auto& b = layout_.block(name);
    return grad.subspan(b.offset, b.size);
  };
  auto scalar = [&](const char* name) { return c[layout_.block(name).offset]; };
  auto scalar_grad = [&](const char* name) { return &grad[layout_.block(name).offset]; };

  Fields f{span_of("alpha1"), span_of("beta1"), span_of("tau1_sq"), span_of("alpha2"),
           span_of("beta2"),  span_of("tau2_sq"), {}, {}, span_of("phi"),
           scalar("mu1_alpha"), scalar("sigma1_alpha"), scalar("mu1_beta"),
           scalar("sigma1_beta"), scalar("sigma1_tau"), 0.0, 1.0, scalar("sigma2_alpha"),
           scalar("mu2_beta"), scalar("sigma2_beta"), scalar("sigma2_tau")};
  Grads g{grad_of("alpha1"), grad_of("beta1"), grad_of("tau1_sq"), grad_of("alpha2"),
          grad_of("beta2"),  grad_of("tau2_sq"), {}, {}, grad_of("phi"),
          scalar_grad("mu1_alpha"), scalar_grad("sigma1_alpha"), scalar_grad("mu1_beta"),
          scalar_grad("sigma1_beta"), scalar_grad("sigma1_tau"), &pinned_scalar_grad[0],
          &pinned_scalar_grad[1], scalar_grad("sigma2_alpha"), scalar_grad("mu2_beta"),
          scalar_grad("sigma2_beta"), scalar_grad("sigma2_tau")};
  if (extended) {
    f.gamma = span_of("gamma");
    f.kappa = span_of("kappa");
    f.mu_kappa = scalar("mu_kappa");
    f.sigma_kappa = scalar("sigma_kappa");
    g.gamma = grad_of("gamma");
    g.kappa = grad_of("kappa");
    g.mu_kappa = scalar_grad("mu_kappa");
    g.sigma_kappa = scalar_grad("sigma_kappa");
  } else {
    const std::size_t groups = layout_.groups();
    f.gamma = std::span<const double>(pinned).first(groups);
    f.kappa = std::span<const double>(pinned).subspan(groups);
    g.gamma = std::span<double>(pinned_grad).first(groups);
    g.kappa = std::span<double>(pinned_grad).subspan(groups);
  }

  double value = 0.0;
  if (terms_.polls) {
    for (const Obs& o : obs_) {
      if (!poll_term(o, f, &g, value)) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return {kRejectedLogDensity, true};
      }
    }
  }
  if (terms_.undecided)
    for (const Obs& o : obs_) undecided_term(o, f, &g, value);
  if (terms_.prior) value += prior_terms(f, race_year_, priors_, variant_, &g);

  // Chain rule through exp and the log-Jacobian of each positive coordinate.
  value += jacobian;
  for (const auto& b : layout_.blocks()) {
    if (!b.positive) continue;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) grad[i] = grad[i] * c[i] + 1.0;
  }
  if (!std::isfinite(value)) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return {kRejectedLogDensity, true};
  }
  return {value, false};
}

double PosteriorModel::log_posterior(std::span<const double> x) const {
  std::vector<double> grad(dimension());
  return log_posterior_and_grad(x, grad).log_density;
}

std::vector<double> PosteriorModel::initial_point(std::mt19937_64& rng) const {
  constexpr double kHalfNormalMedian = 0.6744897501960817;
  const PriorConfig& pc = priors_;
  const double sigma1_tau = kHalfNormalMedian * pc.sigma1_tau_scale;
  const double sigma2_tau = kHalfNormalMedian * pc.sigma2_tau_scale;
  auto median_of = [&](const std::string& name) {
    if (name == "tau1_sq") return kHalfNormalMedian * sigma1_tau;
    if (name == "tau2_sq") return kHalfNormalMedian * sigma2_tau;
    if (name == "sigma1_alpha") return kHalfNormalMedian * pc.sigma1_alpha_scale;
    if (name == "sigma1_beta") return kHalfNormalMedian * pc.sigma1_beta_scale;
    if (name == "sigma1_tau") return sigma1_tau;
    if (name == "sigma_kappa") return std::numbers::ln2 * pc.sigma_kappa_mean;
    if (name == "sigma2_alpha") return kHalfNormalMedian * pc.sigma2_alpha_scale;
    if (name == "sigma2_beta") return kHalfNormalMedian * pc.sigma2_beta_scale;
    if (name == "sigma2_tau") return sigma2_tau;
    throw std::logic_error("no prior median for '" + name + "'");
  };
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::vector<double> x(dimension());
  for (const auto& b : layout_.blocks()) {
    const double centre = b.positive ? std::log(median_of(b.name)) : 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) x[i] = centre + jitter(rng);
  }
  return x;
}

}  // namespace pollbias
