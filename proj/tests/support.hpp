#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pollbias/posterior.hpp"
#include "pollbias/synthetic.hpp"

namespace testing {

// A small multi-year scenario with two houses; every parameter drawn from
// the generator's priors except the truths below.
inline pollbias::synthetic::ScenarioSpec small_scenario(std::size_t races, std::size_t polls,
                                                        std::uint64_t seed) {
  using namespace pollbias;
  synthetic::ScenarioSpec spec;
  spec.seed = seed;
  spec.polls_per_race = polls;
  static const char* const kStates[] = {"AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE",
                                        "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> v(0.38, 0.62);
  for (std::size_t r = 0; r < races; ++r) {
    synthetic::RaceSpec race;
    race.state = kStates[r % 16];
    race.year = 2012 + 4 * static_cast<int>(r / 16 + r % 2);
    race.outcome = v(rng);
    race.tau1_sq = 2e-4;
    race.tau2_sq = 4e-5;
    race.alpha2 = 0.05 + 0.01 * static_cast<double>(r % 4);
    spec.races.push_back(race);
  }
  spec.hyper.sigma1_alpha = 0.05;
  spec.hyper.sigma1_beta = 0.05;
  spec.hyper.sigma2_beta = 0.01;
  spec.gamma_by_margin = {{MarginGroup::Close, 0.3}, {MarginGroup::StrongDem, -0.2}};
  const std::size_t total = races * polls;
  spec.houses = {{"Acme", 0.03, std::max<std::size_t>(8, total / 4)},
                 {"Zenith", -0.02, std::max<std::size_t>(8, total / 5)}};
  return spec;
}

// Random unconstrained point: locations in [-0.5, 0.5], log-scales around
// small positive values.
inline std::vector<double> random_point(const pollbias::ParameterLayout& layout,
                                        std::mt19937_64& rng) {
  std::vector<double> x(layout.dimension());
  std::uniform_real_distribution<double> loc(-0.5, 0.5), logscale(-6.0, -1.5);
  for (const auto& b : layout.blocks()) {
    for (std::size_t k = 0; k < b.size; ++k) x[b.offset + k] = b.positive ? logscale(rng) : loc(rng);
  }
  return x;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pollbias_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

namespace testing {

// Two races, three polls, fixed parameters. Mirrored in
// tools/make_bias_golden.py, which produces the expected values.
struct Fixture {
  pollbias::PreparedDataset data;
  pollbias::ParameterSet params;
};

inline Fixture bias_fixture() {
  using namespace pollbias;
  Fixture f;
  PreparedDataset& d = f.data;
  d.races = {make_race_result("AA", 2016, Date::from_ymd(2016, 11, 8), 550000, 450000),
             make_race_result("BB", 2016, Date::from_ymd(2016, 11, 8), 490000, 510000)};
  d.years = {2016};
  d.race_year = {0, 0};
  d.race_group = {static_cast<std::size_t>(d.races[0].margin_group),
                  static_cast<std::size_t>(d.races[1].margin_group)};
  d.houses = {"Acme"};
  auto poll = [](std::string id, std::size_t race, double t, std::int64_t n, double y, double u,
                 std::optional<std::size_t> house) {
    PreparedPoll p;
    p.source.poll_id = std::move(id);
    p.source.sample_size = n;
    p.race = race;
    p.t = t;
    p.days_to_election = static_cast<int>(std::lround(t * 35));
    p.y = y;
    p.u = u;
    p.house = house;
    return p;
  };
  d.polls = {poll("p0", 0, 0.2, 800, 0.56, 0.05, 0), poll("p1", 0, 0.6, 600, 0.53, 0.07, {}),
             poll("p2", 1, 0.0, 1000, 0.50, 0.09, 0)};
  ParameterSet& p = f.params;
  p.alpha1 = {0.05, -0.03};
  p.beta1 = {0.1, -0.2};
  p.tau1_sq = {4e-4, 1e-4};
  p.alpha2 = {0.06, 0.08};
  p.beta2 = {0.0, 0.0};
  p.tau2_sq = {1e-4, 1e-4};
  p.gamma = {0.3, 1.1, -0.4};
  p.kappa = {0.07};
  p.phi = {0.04};
  return f;
}

}  // namespace testing
