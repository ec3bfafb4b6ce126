#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pollbias/data_ingest.hpp"
#include "pollbias/parameters.hpp"

namespace pollbias::synthetic {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One simulated race. Unset per-race parameters are drawn from their
/// conditional priors given the scenario hyperparameters.
struct RaceSpec {
  std::string state;
  int year = 0;
  double outcome = 0.5;  // Republican two-party share v_r
  std::optional<double> alpha1, beta1, tau1_sq, alpha2, beta2, tau2_sq;
};

struct HouseSpec {
  std::string name;
  double kappa = 0.0;
  std::size_t polls = 0;  // spread round-robin over races
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  AllocationMode mode = AllocationMode::Proportional;
  int window_days = 35;
  std::size_t polls_per_race = 12;
  std::int64_t sample_size_min = 500;
  std::int64_t sample_size_max = 1500;
  double undecided_reporting = 1.0;
  std::vector<RaceSpec> races;
  std::vector<HouseSpec> houses;
  // gamma by margin group, overridden per "YEAR-Group" label
  std::map<MarginGroup, double> gamma_by_margin;
  std::map<std::string, double> gamma_by_group;
  std::map<int, double> phi;  // per year; default 0.04
  ParameterSet hyper;         // scalar hyperparameters (vectors ignored)
  std::size_t min_polls_per_race = 5;
  std::size_t min_polls_per_house = 8;

  /// Throws ScenarioError when the scenario cannot produce a valid dataset.
  void validate() const;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

/// First Tuesday after the first Monday of November.
Date election_day(int year);

/// Scenario used by the recovery check: one year, 20 races split across
/// the three margin groups with gamma {0, 0.5, 1.0}, alpha1 in
/// [-0.1, 0.1], undecided levels spread over 3-16% so gamma is identified
/// apart from alpha1, five houses. Race-level truths are drawn from `seed`.
ScenarioSpec recovery_scenario(std::uint64_t seed);

struct Generated {
  std::vector<PollRecord> polls;
  std::vector<RaceResult> results;
  Preparation preparation;
  ParameterSet truth;  // aligned with preparation.dataset indices
  std::size_t draws = 0;
  std::size_t truncated = 0;

  double truncation_fraction() const {
    return draws == 0 ? 0.0 : static_cast<double>(truncated) / static_cast<double>(draws);
  }
};

/// Deterministic in spec.seed; every poll uses its own random stream.
Generated generate(const ScenarioSpec& spec);

}  // namespace pollbias::synthetic
