#include <doctest.h>

#include <cmath>
#include <random>

#include "pollbias/diagnostics.hpp"

using namespace pollbias::diagnostics;

namespace {

ChainDraws iid(std::size_t chains, std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  ChainDraws out(chains, std::vector<double>(n));
  for (std::size_t c = 0; c < chains; ++c) {
    for (auto& x : out[c]) x = z(rng) + shift * static_cast<double>(c);
  }
  return out;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("iid draws: R-hat near one, ESS near the draw count") {
    const auto d = iid(4, 1000, 1);
    CHECK(split_rhat(d) < 1.01);
    const double ess = bulk_ess(d);
    CHECK(ess >= 2000);
    CHECK(ess <= 4400);
  }

  TEST_CASE("separated chains give a large R-hat") {
    CHECK(split_rhat(iid(4, 500, 2, 3.0)) > 1.5);
  }

  TEST_CASE("split R-hat by hand") {
    // Two chains of length 4 -> four halves of length 2.
    const ChainDraws d = {{1, 2, 3, 5}, {2, 2, 4, 8}};
    const std::vector<std::vector<double>> halves = {{1, 2}, {3, 5}, {2, 2}, {4, 8}};
    double grand = 0, w = 0;
    std::vector<double> means;
    for (const auto& h : halves) {
      const double m = (h[0] + h[1]) / 2;
      means.push_back(m);
      grand += m / 4;
      w += ((h[0] - m) * (h[0] - m) + (h[1] - m) * (h[1] - m)) / 1.0 / 4;
    }
    double b = 0;
    for (double m : means) b += 2.0 * (m - grand) * (m - grand) / 3.0;
    const double var = 0.5 * w + b / 2.0;
    CHECK(split_rhat(d) == doctest::Approx(std::sqrt(var / w)).epsilon(1e-12));
  }

  TEST_CASE("identical chains with matching halves") {
    // No between-half variance, so R-hat is sqrt((m - 1) / m) for half length m.
    std::vector<double> c;
    for (int rep = 0; rep < 2; ++rep) {
      for (int k = 0; k < 50; ++k) c.push_back(std::sin(0.7 * k));
    }
    CHECK(split_rhat({c, c}) == doctest::Approx(std::sqrt(49.0 / 50.0)).epsilon(1e-12));
  }

  TEST_CASE("constant chains have undefined R-hat") {
    CHECK(std::isnan(split_rhat({{1, 1, 1, 1}, {1, 1, 1, 1}})));
  }

  TEST_CASE("AR(1) chains: ESS near the analytic value") {
    const double rho = 0.9;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    ChainDraws d(4, std::vector<double>(5000));
    for (auto& c : d) {
      double x = z(rng) / std::sqrt(1 - rho * rho);
      for (auto& v : c) {
        x = rho * x + z(rng);
        v = x;
      }
    }
    const double expected = 20000 * (1 - rho) / (1 + rho);
    CHECK(split_ess(d) == doctest::Approx(expected).epsilon(0.25));
  }

  TEST_CASE("rank normalization uses average ranks for ties") {
    const auto z = rank_normalize({{1, 2, 2, 3}});
    CHECK(z[0][1] == z[0][2]);
    CHECK(z[0][0] < z[0][1]);
    CHECK(z[0][0] == doctest::Approx(-z[0][3]));
  }

  TEST_CASE("report summary and one-chain warning") {
    std::vector<std::vector<std::vector<double>>> draws(2, std::vector<std::vector<double>>(100));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    for (auto& c : draws) {
      for (auto& s : c) s = {z(rng), 5.0 + z(rng)};
    }
    const Report r = summarize(draws, {"a", "b"});
    REQUIRE(r.parameters.size() == 2);
    CHECK(r.parameters[1].mean == doctest::Approx(5.0).epsilon(0.05));
    CHECK(r.converged);
    const Report one = summarize({draws[0]}, {"a", "b"});
    CHECK(std::isnan(one.parameters[0].rhat));
    CHECK_FALSE(one.warnings.empty());
  }
}
