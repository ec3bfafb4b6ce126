#include "pollbias/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

namespace pollbias {

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("chains must be at least 1");
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target_accept must lie in (0, 1)");
  if (max_treedepth < 1 || max_treedepth > 30)
    throw std::invalid_argument("max_treedepth must lie in [1, 30]");
}

std::size_t SamplerRun::total_divergences() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.divergences;
  return n;
}

std::size_t threads_from_environment(std::size_t fallback) {
  if (const char* env = std::getenv("POLLBIAS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

LogDensity as_log_density(const PosteriorModel& model) {
  LogDensity d;
  d.dimension = model.dimension();
  d.evaluate = [&model](std::span<const double> x, std::span<double> g) {
    return model.log_posterior_and_grad(x, g);
  };
  d.initialize = [&model](std::mt19937_64& rng) { return model.initial_point(rng); };
  return d;
}

double gradient_check(const LogDensity& target, std::span<const double> x, double h) {
  const std::size_t n = target.dimension;
  std::vector<double> grad(n), scratch(n), probe(x.begin(), x.end());
  target.evaluate(x, grad);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probe[i] = x[i] + h;
    const double up = target.evaluate(probe, scratch).log_density;
    probe[i] = x[i] - h;
    const double down = target.evaluate(probe, scratch).log_density;
    probe[i] = x[i];
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(grad[i] - fd) / std::max({1.0, std::abs(grad[i]), std::abs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

namespace hmc {

namespace {
void evaluate(const LogDensity& target, PhasePoint& z) {
  for (double v : z.q) {
    if (!std::isfinite(v)) {
      z.rejected = true;
      z.log_density = kRejectedLogDensity;
      std::fill(z.grad.begin(), z.grad.end(), 0.0);
      return;
    }
  }
  const DensityEval e = target.evaluate(z.q, z.grad);
  z.log_density = e.log_density;
  z.rejected = e.rejected || !std::isfinite(e.log_density);
}
}  // namespace

double hamiltonian(std::span<const double> inverse_metric, const PhasePoint& z) {
  if (z.rejected) return std::numeric_limits<double>::infinity();
  double kinetic = 0.0;
  for (std::size_t i = 0; i < z.p.size(); ++i) kinetic += z.p[i] * z.p[i] * inverse_metric[i];
  return -z.log_density + 0.5 * kinetic;
}

void leapfrog(const LogDensity& target, std::span<const double> inverse_metric, PhasePoint& z,
              double eps) {
  const std::size_t n = z.q.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  for (std::size_t i = 0; i < n; ++i) z.q[i] += eps * inverse_metric[i] * z.p[i];
  evaluate(target, z);
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
}

}  // namespace hmc

namespace {

using hmc::PhasePoint;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}
  void restart(double eps) {
    mu_ = std::log(10.0 * eps);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double update(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double c = static_cast<double>(counter_);
    const double eta = 1.0 / (c + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(c) / kGamma;
    const double x_eta = std::pow(c, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  std::size_t counter_ = 0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Warmup schedule: fast initial buffer, doubling slow windows that
// estimate the metric, fast terminal buffer.
class WindowSchedule {
 public:
  WindowSchedule(std::size_t warmup, bool adapt_metric) : warmup_(warmup), enabled_(adapt_metric) {
    if (!enabled_ || warmup_ < 20) {
      enabled_ = false;
      return;
    }
    if (warmup_ < kInit + kTerm + kBase) {
      init_ = warmup_ * 15 / 100;
      term_ = warmup_ / 10;
      base_ = warmup_ - init_ - term_;
    } else {
      init_ = kInit;
      term_ = kTerm;
      base_ = kBase;
    }
    window_ = base_;
    window_end_ = init_ + window_;
    fit_window();
  }

  bool in_slow_window(std::size_t iter) const {
    return enabled_ && iter >= init_ && iter < warmup_ - term_;
  }
  bool ends_window(std::size_t iter) {
    if (!in_slow_window(iter) || iter + 1 != window_end_) return false;
    window_ *= 2;
    window_end_ = iter + 1 + window_;
    fit_window();
    return true;
  }

 private:
  static constexpr std::size_t kInit = 75, kTerm = 50, kBase = 25;
  // Stretch the next window to the slow phase's end if the one after it would not fit.
  void fit_window() {
    const std::size_t slow_end = warmup_ - term_;
    if (window_end_ + 2 * window_ > slow_end) window_end_ = slow_end;
  }
  std::size_t warmup_;
  bool enabled_;
  std::size_t init_ = 0, term_ = 0, base_ = 0, window_ = 0, window_end_ = 0;
};

class WelfordVariance {
 public:
  explicit WelfordVariance(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}
  void add(const std::vector<double>& x) {
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const { return count_; }
  // Sample variance shrunk toward 1e-3, as in Stan.
  std::vector<double> regularized() const {
    const double n = static_cast<double>(count_);
    std::vector<double> v(mean_.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = m2_[i] / (n - 1.0);
      v[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return v;
  }
  void reset() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

class NutsChain {
 public:
  NutsChain(const LogDensity& target, const SamplerConfig& config, std::size_t chain_index)
      : target_(target),
        config_(config),
        rng_(make_seed(config.seed, chain_index)),
        inverse_metric_(target.dimension, 1.0),
        adapter_(config.target_accept) {}

  ChainResult run() {
    initialize();
    find_reasonable_step_size();
    adapter_.restart(eps_);
    WindowSchedule schedule(config_.warmup, config_.mass_matrix == MassMatrix::AdaptedDiagonal);
    WelfordVariance variance(target_.dimension);

    ChainResult out;
    for (std::size_t iter = 0; iter < config_.warmup; ++iter) {
      const Transition t = transition();
      eps_ = adapter_.update(t.accept_stat);
      if (schedule.in_slow_window(iter)) variance.add(z_.q);
      if (schedule.ends_window(iter)) {
        inverse_metric_ = variance.regularized();
        variance.reset();
        find_reasonable_step_size();
        adapter_.restart(eps_);
      }
    }
    if (config_.warmup > 0) eps_ = adapter_.final_step_size();

    double accept_sum = 0.0;
    out.draws.reserve(config_.samples);
    for (std::size_t iter = 0; iter < config_.samples; ++iter) {
      const Transition t = transition();
      out.draws.push_back(z_.q);
      out.divergences += t.divergent ? 1 : 0;
      out.treedepth_hits += t.depth >= config_.max_treedepth ? 1 : 0;
      out.leapfrog_steps += t.leapfrogs;
      out.treedepths.push_back(t.depth);
      accept_sum += t.accept_stat;
    }
    out.step_size = eps_;
    out.inverse_metric = inverse_metric_;
    out.mean_accept_stat = accept_sum / static_cast<double>(config_.samples);
    return out;
  }

 private:
  struct Transition {
    double accept_stat = 0.0;
    std::size_t depth = 0;
    std::size_t leapfrogs = 0;
    bool divergent = false;
  };

  static std::mt19937_64 make_seed(std::uint64_t seed, std::size_t chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x9e3779b9u};
    return std::mt19937_64(seq);
  }

  void initialize() {
    const std::size_t n = target_.dimension;
    z_.q.assign(n, 0.0);
    z_.p.assign(n, 0.0);
    z_.grad.assign(n, 0.0);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    for (int attempt = 0; attempt < 100; ++attempt) {
      if (target_.initialize) {
        z_.q = target_.initialize(rng_);
      } else {
        for (double& v : z_.q) v = unif(rng_);
      }
      if (z_.q.size() != n) throw SamplerError("initializer returned wrong dimension");
      const DensityEval e = target_.evaluate(z_.q, z_.grad);
      const bool finite = std::isfinite(e.log_density) &&
                          std::all_of(z_.grad.begin(), z_.grad.end(),
                                      [](double g) { return std::isfinite(g); });
      if (!e.rejected && finite) {
        z_.log_density = e.log_density;
        z_.rejected = false;
        return;
      }
    }
    throw SamplerError("no finite log density and gradient after 100 initialization attempts");
  }

  void sample_momentum(PhasePoint& z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < z.p.size(); ++i)
      z.p[i] = normal(rng_) / std::sqrt(inverse_metric_[i]);
  }

  std::vector<double> sharp(const std::vector<double>& p) const {
    std::vector<double> s(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s[i] = inverse_metric_[i] * p[i];
    return s;
  }

  void find_reasonable_step_size() {
    if (eps_ <= 0.0 || !std::isfinite(eps_)) eps_ = 1.0;
    const PhasePoint start = z_;
    PhasePoint z = start;
    sample_momentum(z);
    double h0 = hmc::hamiltonian(inverse_metric_, z);
    hmc::leapfrog(target_, inverse_metric_, z, eps_);
    double h = hmc::hamiltonian(inverse_metric_, z);
    if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    const double log_threshold = std::log(0.8);
    const int direction = (h0 - h) > log_threshold ? 1 : -1;
    for (int guard = 0; guard < 200; ++guard) {
      z = start;
      sample_momentum(z);
      h0 = hmc::hamiltonian(inverse_metric_, z);
      hmc::leapfrog(target_, inverse_metric_, z, eps_);
      h = hmc::hamiltonian(inverse_metric_, z);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      const double delta = h0 - h;
      if (direction == 1 && !(delta > log_threshold)) break;
      if (direction == -1 && !(delta < log_threshold)) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size search diverged: posterior may be improper");
      if (eps_ < 1e-300) throw SamplerError("step size search collapsed to zero");
    }
  }

  struct TreeState {
    double h0 = 0.0;
    std::size_t leapfrogs = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
  };

  // Builds a subtree of 2^depth leapfrog steps from `z` in direction `sign`,
  // updating `z` to its far end. Returns false if the subtree diverged or
  // made a U-turn.
  bool build_tree(std::size_t depth, PhasePoint& z, PhasePoint& propose,
                  std::vector<double>& p_sharp_beg, std::vector<double>& p_sharp_end,
                  std::vector<double>& rho, std::vector<double>& p_beg, std::vector<double>& p_end,
                  double sign, TreeState& st, double& log_sum_weight) {
    if (depth == 0) {
      hmc::leapfrog(target_, inverse_metric_, z, sign * eps_);
      ++st.leapfrogs;
      double h = hmc::hamiltonian(inverse_metric_, z);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - st.h0 > kDivergenceThreshold) st.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, st.h0 - h);
      st.sum_metro_prob += st.h0 - h > 0.0 ? 1.0 : std::exp(st.h0 - h);
      propose = z;
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += z.p[i];
      p_sharp_beg = sharp(z.p);
      p_sharp_end = p_sharp_beg;
      p_beg = z.p;
      p_end = z.p;
      return !st.divergent;
    }

    const std::size_t n = target_.dimension;
    const double neg_inf = -std::numeric_limits<double>::infinity();

    std::vector<double> p_sharp_init_end(n), p_init_end(n), rho_init(n, 0.0);
    double log_sum_weight_init = neg_inf;
    if (!build_tree(depth - 1, z, propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, sign, st, log_sum_weight_init))
      return false;

    PhasePoint propose_final;
    std::vector<double> p_sharp_final_beg(n), p_final_beg(n), rho_final(n, 0.0);
    double log_sum_weight_final = neg_inf;
    if (!build_tree(depth - 1, z, propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, sign, st, log_sum_weight_final))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      propose = std::move(propose_final);
    } else {
      const double accept = std::exp(log_sum_weight_final - log_sum_weight_subtree);
      if (uniform_(rng_) < accept) propose = std::move(propose_final);
    }

    std::vector<double> rho_subtree(n), rho_extended(n);
    for (std::size_t i = 0; i < n; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    for (std::size_t i = 0; i < n; ++i) rho_extended[i] = rho_init[i] + p_final_beg[i];
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_extended);
    for (std::size_t i = 0; i < n; ++i) rho_extended[i] = rho_final[i] + p_init_end[i];
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_extended);
    return persist;
  }

  static bool no_u_turn(const std::vector<double>& p_sharp_minus,
                        const std::vector<double>& p_sharp_plus, const std::vector<double>& rho) {
    return dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0;
  }

  Transition transition() {
    const std::size_t n = target_.dimension;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    sample_momentum(z_);

    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose;
    std::vector<double> p_sharp_fwd_bck = sharp(z_.p), p_sharp_fwd_fwd = p_sharp_fwd_bck;
    std::vector<double> p_sharp_bck_fwd = p_sharp_fwd_bck, p_sharp_bck_bck = p_sharp_fwd_bck;
    std::vector<double> p_fwd_bck = z_.p, p_fwd_fwd = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    std::vector<double> rho = z_.p;

    TreeState st;
    st.h0 = hmc::hamiltonian(inverse_metric_, z_);
    double log_sum_weight = 0.0;
    std::size_t depth = 0;

    while (depth < config_.max_treedepth) {
      std::vector<double> rho_fwd(n, 0.0), rho_bck(n, 0.0);
      double log_sum_weight_subtree = neg_inf;
      bool valid;
      if (uniform_(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        PhasePoint z = z_fwd;
        valid = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, 1.0, st, log_sum_weight_subtree);
        z_fwd = std::move(z);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        PhasePoint z = z_bck;
        valid = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, -1.0, st, log_sum_weight_subtree);
        z_bck = std::move(z);
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else {
        const double accept = std::exp(log_sum_weight_subtree - log_sum_weight);
        if (uniform_(rng_) < accept) z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      for (std::size_t i = 0; i < n; ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      std::vector<double> rho_extended(n);
      for (std::size_t i = 0; i < n; ++i) rho_extended[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      for (std::size_t i = 0; i < n; ++i) rho_extended[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }

    z_ = std::move(z_sample);
    Transition t;
    t.depth = depth;
    t.leapfrogs = st.leapfrogs;
    t.divergent = st.divergent;
    t.accept_stat = st.leapfrogs ? st.sum_metro_prob / static_cast<double>(st.leapfrogs) : 0.0;
    return t;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::vector<double> inverse_metric_;
  StepSizeAdapter adapter_;
  PhasePoint z_;
  double eps_ = 1.0;
};

}  // namespace

SamplerRun run_nuts(const LogDensity& target, const SamplerConfig& config) {
  config.validate();
  if (target.dimension == 0) throw SamplerError("target has zero dimension");
  if (!target.evaluate) throw SamplerError("target has no evaluator");

  if (config.check_gradient) {
    std::mt19937_64 probe_rng(config.seed ^ 0x5bd1e995ULL);
    std::vector<double> probe;
    if (target.initialize) {
      probe = target.initialize(probe_rng);
    } else {
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      probe.resize(target.dimension);
      for (double& v : probe) v = unif(probe_rng);
    }
    std::vector<double> g(target.dimension);
    if (!target.evaluate(probe, g).rejected) {
      const double err = gradient_check(target, probe);
      if (err > 1e-3)
        throw SamplerError("gradient check failed at probe point (relative error " +
                           std::to_string(err) + ")");
    }
  }

  SamplerRun run;
  run.chains.resize(config.chains);
  const std::size_t workers =
      std::min(config.chains, config.threads ? config.threads : threads_from_environment(config.chains));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&] {
    for (std::size_t c = next++; c < config.chains; c = next++) {
      try {
        run.chains[c] = NutsChain(target, config, c).run();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  const double total = static_cast<double>(config.chains * config.samples);
  run.unreliable = static_cast<double>(run.total_divergences()) > kUnreliableDivergenceRate * total;
  return run;
}

}  // namespace pollbias
