#include "pollbias/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace pollbias::diagnostics {
namespace {

void check_shape(const ChainDraws& chains, std::size_t min_draws) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("chains must have equal length");
  if (n < min_draws)
    throw std::invalid_argument("at least " + std::to_string(min_draws) + " draws per chain needed");
}

ChainDraws split(const ChainDraws& chains) {
  ChainDraws out;
  const std::size_t n = chains.front().size();
  const std::size_t half = n / 2;
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Stan's multi-chain ESS on the given (already split) chains.
double ess_of(const ChainDraws& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 4) return std::numeric_limits<double>::quiet_NaN();

  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = variance_of(chains[c]);
  }
  const double mean_var = mean_of(vars);
  if (!(mean_var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += variance_of(means);

  // Mean over chains of the biased autocovariance at lag t.
  auto mean_acov = [&](std::size_t t) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t + 5 < n && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;

  // Geyer's initial monotone sequence.
  for (t = 1; t + 2 <= max_t; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0;
      rho[t + 2] = rho[t + 1];
    }
  }
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t && k < n; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  const double total = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

double split_rhat(const ChainDraws& chains) {
  check_shape(chains, 4);
  const ChainDraws halves = split(chains);
  const std::size_t n = halves.front().size();
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    vars.push_back(variance_of(h));
  }
  const double w = mean_of(vars);
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double b_over_n = variance_of(means);
  const double var_plus = static_cast<double>(n - 1) / static_cast<double>(n) * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double split_ess(const ChainDraws& chains) {
  check_shape(chains, 4);
  return ess_of(split(chains));
}

ChainDraws rank_normalize(const ChainDraws& chains) {
  check_shape(chains, 1);
  const std::size_t n = chains.front().size();
  const std::size_t total = chains.size() * n;
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(total);
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) pooled.emplace_back(chains[c][i], c * n + i);
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> ranks(total);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[pooled[k].second] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> standard;
  ChainDraws out(chains.size(), std::vector<double>(n));
  const double s = static_cast<double>(total);
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (std::size_t i = 0; i < n; ++i)
      out[c][i] = boost::math::quantile(standard, (ranks[c * n + i] - 0.375) / (s + 0.25));
  return out;
}

double bulk_ess(const ChainDraws& chains) {
  check_shape(chains, 4);
  return split_ess(rank_normalize(chains));
}

Report summarize(const std::vector<std::vector<std::vector<double>>>& draws,
                 const std::vector<std::string>& names) {
  if (draws.empty()) throw std::invalid_argument("no chains");
  const std::size_t chains = draws.size();
  const std::size_t n = draws.front().size();
  if (n < 4) throw std::invalid_argument("at least 4 draws per chain needed");
  Report report;
  if (chains < 2) report.warnings.push_back("single chain: R-hat omitted");
  report.max_rhat = 0.0;
  report.min_ess_bulk = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < names.size(); ++k) {
    ChainDraws per(chains, std::vector<double>(n));
    for (std::size_t c = 0; c < chains; ++c) {
      if (draws[c].size() != n) throw std::invalid_argument("chains must have equal length");
      for (std::size_t s = 0; s < n; ++s) per[c][s] = draws[c][s][k];
    }
    std::vector<double> pooled;
    for (const auto& c : per) pooled.insert(pooled.end(), c.begin(), c.end());
    ParameterDiagnostics d;
    d.name = names[k];
    d.mean = mean_of(pooled);
    d.sd = pooled.size() > 1 ? std::sqrt(variance_of(pooled)) : 0.0;
    d.rhat = chains >= 2 ? split_rhat(per) : std::numeric_limits<double>::quiet_NaN();
    d.ess_bulk = bulk_ess(per);
    if (std::isfinite(d.rhat)) {
      report.max_rhat = std::max(report.max_rhat, d.rhat);
      if (d.rhat > kRhatThreshold) report.converged = false;
    }
    if (std::isfinite(d.ess_bulk)) report.min_ess_bulk = std::min(report.min_ess_bulk, d.ess_bulk);
    report.parameters.push_back(std::move(d));
  }
  if (!report.converged) report.warnings.push_back("R-hat above 1.05 for at least one parameter");
  return report;
}

}  // namespace pollbias::diagnostics
