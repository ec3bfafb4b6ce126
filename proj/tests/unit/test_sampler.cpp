#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pollbias/diagnostics.hpp"
#include "pollbias/sampler.hpp"

using namespace pollbias;

namespace {

LogDensity gaussian(std::vector<double> sd, double rho = 0.0) {
  // Independent coordinates, except the first two which have correlation rho.
  LogDensity t;
  t.dimension = sd.size();
  t.evaluate = [sd, rho](std::span<const double> x, std::span<double> g) {
    if (x.size() == 1) {
      g[0] = -x[0] / (sd[0] * sd[0]);
      return DensityEval{-0.5 * x[0] * x[0] / (sd[0] * sd[0]), false};
    }
    double lp = 0.0;
    for (std::size_t k = 2; k < x.size(); ++k) {
      lp -= 0.5 * x[k] * x[k] / (sd[k] * sd[k]);
      g[k] = -x[k] / (sd[k] * sd[k]);
    }
    const double a = x[0] / sd[0], b = x[1] / sd[1], c = 1.0 - rho * rho;
    lp -= 0.5 * (a * a - 2 * rho * a * b + b * b) / c;
    g[0] = -(a - rho * b) / (c * sd[0]);
    g[1] = -(b - rho * a) / (c * sd[1]);
    return DensityEval{lp, false};
  };
  return t;
}

std::vector<double> column(const SamplerRun& run, std::size_t k) {
  std::vector<double> v;
  for (const auto& c : run.chains) {
    for (const auto& d : c.draws) v.push_back(d[k]);
  }
  return v;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("standard normal moments") {
    SamplerConfig cfg;
    cfg.seed = 3;
    const auto run = run_nuts(gaussian({1, 1, 1}), cfg);
    CHECK(run.total_divergences() == 0);
    CHECK_FALSE(run.unreliable);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = column(run, k);
      CHECK(v.size() == 4000);
      const double m = mean(v);
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size());
      CHECK(std::abs(m) < 0.1);
      CHECK(var == doctest::Approx(1.0).epsilon(0.1));
    }
  }

  TEST_CASE("correlated, badly scaled Gaussian") {
    SamplerConfig cfg;
    cfg.seed = 4;
    const auto run = run_nuts(gaussian({1.0, 10.0, 0.01}, 0.9), cfg);
    const auto a = column(run, 0), b = column(run, 1), c = column(run, 2);
    const double ma = mean(a), mb = mean(b);
    double saa = 0, sbb = 0, sab = 0, scc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
      sab += (a[i] - ma) * (b[i] - mb);
      scc += c[i] * c[i];
    }
    const double n = static_cast<double>(a.size());
    CHECK(std::sqrt(saa / n) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::sqrt(sbb / n) == doctest::Approx(10.0).epsilon(0.1));
    CHECK(sab / std::sqrt(saa * sbb) == doctest::Approx(0.9).epsilon(0.03));
    CHECK(std::sqrt(scc / n) == doctest::Approx(0.01).epsilon(0.1));
    // Adapted metric tracks the scales.
    CHECK(run.chains[0].inverse_metric[1] > 10 * run.chains[0].inverse_metric[2]);
  }

  TEST_CASE("draws are deterministic and independent of thread count") {
    SamplerConfig cfg;
    cfg.warmup = 200;
    cfg.samples = 100;
    cfg.seed = 77;
    cfg.threads = 1;
    const auto a = run_nuts(gaussian({1, 2}), cfg);
    cfg.threads = 4;
    const auto b = run_nuts(gaussian({1, 2}), cfg);
    for (std::size_t c = 0; c < 4; ++c) CHECK(a.chains[c].draws == b.chains[c].draws);
    cfg.seed = 78;
    const auto d = run_nuts(gaussian({1, 2}), cfg);
    CHECK(a.chains[0].draws != d.chains[0].draws);
  }

  TEST_CASE("leapfrog energy error shrinks with the step size") {
    const auto target = gaussian({1, 1, 1});
    const std::vector<double> metric(3, 1.0);
    auto energy_error = [&](double eps) {
      hmc::PhasePoint z;
      z.q = {0.3, -1.0, 0.7};
      z.p = {1.0, 0.5, -0.2};
      z.grad.assign(3, 0.0);
      z.log_density = target.evaluate(z.q, z.grad).log_density;
      const double h0 = hmc::hamiltonian(metric, z);
      double worst = 0.0;
      for (int i = 0; i < static_cast<int>(1.0 / eps); ++i) {
        hmc::leapfrog(target, metric, z, eps);
        worst = std::max(worst, std::abs(hmc::hamiltonian(metric, z) - h0));
      }
      return worst;
    };
    const double e1 = energy_error(0.1), e2 = energy_error(0.05);
    CHECK(e1 < 0.01);
    CHECK(e2 < e1 / 3.0);
  }

  TEST_CASE("KS test of thinned draws against the normal CDF") {
    SamplerConfig cfg;
    cfg.seed = 12;
    const auto run = run_nuts(gaussian({1}), cfg);
    std::vector<double> v;
    for (const auto& c : run.chains) {
      for (std::size_t i = 0; i < c.draws.size(); i += 4) v.push_back(c.draws[i][0]);
    }
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = 0.5 * std::erfc(-v[i] / std::sqrt(2.0));
      d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(d * std::sqrt(n) < 1.63);  // 1% critical value
  }

  TEST_CASE("rejected regions are never accepted") {
    LogDensity t = gaussian({1});
    auto inner = t.evaluate;
    t.evaluate = [inner](std::span<const double> x, std::span<double> g) {
      if (x[0] > 0.5) {
        g[0] = 0.0;
        return DensityEval{kRejectedLogDensity, true};
      }
      return inner(x, g);
    };
    t.initialize = [](std::mt19937_64&) { return std::vector<double>{-0.5}; };
    SamplerConfig cfg;
    cfg.warmup = 300;
    cfg.samples = 300;
    cfg.check_gradient = false;
    const auto run = run_nuts(t, cfg);
    for (double x : column(run, 0)) CHECK(x <= 0.5);
  }

  TEST_CASE("gradient check flags a wrong gradient") {
    LogDensity good = gaussian({1, 1});
    CHECK(gradient_check(good, std::vector<double>{0.3, -0.2}) < 1e-6);
    LogDensity bad = good;
    bad.evaluate = [](std::span<const double> x, std::span<double> g) {
      g[0] = -2 * x[0];
      g[1] = -x[1];
      return DensityEval{-0.5 * (x[0] * x[0] + x[1] * x[1]), false};
    };
    CHECK(gradient_check(bad, std::vector<double>{0.3, -0.2}) > 0.1);
    SamplerConfig cfg;
    CHECK_THROWS_AS(run_nuts(bad, cfg), SamplerError);
  }

  TEST_CASE("config validation") {
    SamplerConfig cfg;
    cfg.chains = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.target_accept = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.samples = 0;
    CHECK_THROWS(cfg.validate());
  }
}
