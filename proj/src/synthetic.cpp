#include "pollbias/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pollbias/allocation.hpp"
#include "pollbias/posterior.hpp"

namespace pollbias::synthetic {
namespace {

constexpr double kShareEpsilon = 1e-9;
constexpr double kTotalVotes = 1e6;

using Engine = std::mt19937_64;

Engine stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Engine(seq);
}

double normal(Engine& rng, double mean, double sd) {
  if (sd <= 0.0) return mean;
  return std::normal_distribution<double>(mean, sd)(rng);
}

double half_normal(Engine& rng, double sd) { return std::abs(normal(rng, 0.0, sd)); }

double uniform(Engine& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Clamps into [lo, hi] and counts the draw as truncated when it moved.
double truncate(double x, double lo, double hi, std::size_t& truncated) {
  if (x < lo) {
    ++truncated;
    return lo;
  }
  if (x > hi) {
    ++truncated;
    return hi;
  }
  return x;
}

double phi_for(const ScenarioSpec& spec, int year) {
  const auto it = spec.phi.find(year);
  return it == spec.phi.end() ? 0.04 : it->second;
}

// Race-level truths with unset fields drawn from their conditional priors.
struct RaceTruth {
  double alpha1, beta1, tau1_sq, alpha2, beta2, tau2_sq;
};

RaceTruth race_truth(const ScenarioSpec& spec, std::size_t index) {
  const RaceSpec& r = spec.races[index];
  const ParameterSet& h = spec.hyper;
  Engine rng = stream(spec.seed, 0xACE, index);
  RaceTruth t{};
  t.alpha1 = r.alpha1 ? *r.alpha1 : normal(rng, h.mu1_alpha, h.sigma1_alpha);
  t.beta1 = r.beta1 ? *r.beta1 : normal(rng, h.mu1_beta, h.sigma1_beta);
  t.tau1_sq = r.tau1_sq ? *r.tau1_sq : half_normal(rng, h.sigma1_tau);
  t.alpha2 = r.alpha2 ? *r.alpha2 : normal(rng, phi_for(spec, r.year), h.sigma2_alpha);
  t.beta2 = r.beta2 ? *r.beta2 : normal(rng, h.mu2_beta, h.sigma2_beta);
  t.tau2_sq = r.tau2_sq ? *r.tau2_sq : half_normal(rng, h.sigma2_tau);
  return t;
}

double gamma_for(const ScenarioSpec& spec, int year, MarginGroup margin) {
  const std::string label = std::to_string(year) + "-" + std::string(to_string(margin));
  if (const auto it = spec.gamma_by_group.find(label); it != spec.gamma_by_group.end()) {
    return it->second;
  }
  if (const auto it = spec.gamma_by_margin.find(margin); it != spec.gamma_by_margin.end()) {
    return it->second;
  }
  return 0.0;
}

std::string race_label(const RaceSpec& r) { return r.state + "-" + std::to_string(r.year); }

void read_optional(const nlohmann::json& j, const char* key, std::optional<double>& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}

}  // namespace

Date election_day(int year) {
  const Date nov2 = Date::from_ymd(year, 11, 2);
  // 1970-01-01 was a Thursday; weekday 0 is Sunday.
  const int weekday = ((nov2.days_since_epoch() % 7) + 7 + 4) % 7;
  return nov2 + (2 - weekday + 7) % 7;
}

void ScenarioSpec::validate() const {
  if (races.empty()) throw ScenarioError("scenario has no races");
  if (window_days < 1) throw ScenarioError("window_days must be at least 1");
  if (polls_per_race < min_polls_per_race) {
    throw ScenarioError("polls_per_race " + std::to_string(polls_per_race) +
                        " is below the per-race minimum of " + std::to_string(min_polls_per_race));
  }
  if (sample_size_min < 1 || sample_size_max < sample_size_min) {
    throw ScenarioError("sample size range must satisfy 1 <= min <= max");
  }
  if (!(undecided_reporting >= 0.0 && undecided_reporting <= 1.0)) {
    throw ScenarioError("undecided_reporting must lie in [0, 1]");
  }
  std::set<std::string> labels;
  for (const RaceSpec& r : races) {
    if (r.state.empty()) throw ScenarioError("race without a state");
    if (!(r.outcome > 0.0 && r.outcome < 1.0)) {
      throw ScenarioError("race " + race_label(r) + " outcome must lie strictly inside (0, 1)");
    }
    if (!labels.insert(race_label(r)).second) {
      throw ScenarioError("duplicate race " + race_label(r));
    }
    for (const auto* v : {&r.tau1_sq, &r.tau2_sq}) {
      if (*v && !(**v >= 0.0)) throw ScenarioError("race " + race_label(r) + " has a negative variance");
    }
  }
  std::set<std::string> names;
  std::size_t housed = 0;
  for (const HouseSpec& h : houses) {
    if (h.name.empty()) throw ScenarioError("house without a name");
    if (!names.insert(h.name).second) throw ScenarioError("duplicate house " + h.name);
    if (h.polls < min_polls_per_house) {
      throw ScenarioError("house " + h.name + " has " + std::to_string(h.polls) +
                          " polls, below the house minimum of " +
                          std::to_string(min_polls_per_house));
    }
    housed += h.polls;
  }
  if (housed > races.size() * polls_per_race) {
    throw ScenarioError("houses claim more polls than the scenario contains");
  }
}

Generated generate(const ScenarioSpec& spec) {
  spec.validate();
  Generated out;
  const std::size_t R = spec.races.size();

  std::vector<RaceTruth> truths(R);
  for (std::size_t r = 0; r < R; ++r) {
    truths[r] = race_truth(spec, r);
    const RaceSpec& rs = spec.races[r];
    const double rep = std::round(rs.outcome * kTotalVotes);
    out.results.push_back(
        make_race_result(rs.state, rs.year, election_day(rs.year), rep, kTotalVotes - rep));
  }

  // Slot s = j * R + r is poll j of race r; houses take consecutive slots so
  // each house is spread across races.
  const std::size_t slots = R * spec.polls_per_race;
  std::vector<std::optional<std::size_t>> slot_house(slots);
  std::size_t next = 0;
  for (std::size_t h = 0; h < spec.houses.size(); ++h) {
    for (std::size_t k = 0; k < spec.houses[h].polls; ++k) slot_house[next++] = h;
  }

  for (std::size_t j = 0; j < spec.polls_per_race; ++j) {
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t slot = j * R + r;
      const RaceSpec& rs = spec.races[r];
      const RaceResult& result = out.results[r];
      const RaceTruth& tr = truths[r];
      Engine rng = stream(spec.seed, 1 + r, j);

      const int days = std::uniform_int_distribution<int>(0, spec.window_days)(rng);
      const double t = static_cast<double>(days) / spec.window_days;
      const std::int64_t n =
          std::uniform_int_distribution<std::int64_t>(spec.sample_size_min, spec.sample_size_max)(rng);
      const auto house = slot_house[slot];
      const double kappa = house ? spec.houses[*house].kappa : 0.0;
      const double gamma = gamma_for(spec, rs.year, result.margin_group);

      double u = normal(rng, tr.alpha2 + t * tr.beta2, std::sqrt(tr.tau2_sq));
      u = truncate(u, 0.0, 1.0 - kShareEpsilon, out.truncated);
      const double eta = logit(result.two_party_outcome) + tr.alpha1 + t * tr.beta1 -
                         kUndecidedPredictorScale * tr.alpha2 * gamma + kappa;
      const double p = inv_logit(eta);
      const double var = p * (1.0 - p) / static_cast<double>(n) + tr.tau1_sq;
      double y = normal(rng, p, std::sqrt(var));
      y = truncate(y, kShareEpsilon, 1.0 - kShareEpsilon, out.truncated);
      out.draws += 2;
      const bool reported = uniform(rng, 0.0, 1.0) < spec.undecided_reporting;

      PollRecord rec;
      rec.poll_id = rs.state + std::to_string(rs.year) + "-" + std::to_string(j + 1);
      rec.state = rs.state;
      rec.year = rs.year;
      rec.end_date = result.election_date - days;
      rec.pollster = house ? spec.houses[*house].name
                           : "Solo " + race_label(rs) + "-" + std::to_string(j + 1);
      rec.sample_size = n;
      if (spec.mode == AllocationMode::Proportional) {
        rec.rep_share = y * (1.0 - u);
        rec.dem_share = (1.0 - y) * (1.0 - u);
      } else {
        ++out.draws;
        rec.rep_share = truncate(y - 0.5 * u, kShareEpsilon, 1.0, out.truncated);
        rec.dem_share = truncate(1.0 - y - 0.5 * u, kShareEpsilon, 1.0, out.truncated);
      }
      if (reported) rec.und_share = u;
      out.polls.push_back(std::move(rec));
    }
  }

  PrepareOptions options;
  options.mode = spec.mode;
  options.window_days = spec.window_days;
  options.min_polls_per_race = spec.min_polls_per_race;
  options.min_polls_per_house = spec.min_polls_per_house;
  out.preparation = prepare_dataset(out.polls, out.results, options);
  const PreparedDataset& data = out.preparation.dataset;
  if (data.race_count() != R) {
    throw ScenarioError("scenario lost races under the inclusion rules (" +
                        std::to_string(data.race_count()) + " of " + std::to_string(R) +
                        " kept)");
  }
  if (data.house_count() != spec.houses.size()) {
    throw ScenarioError("scenario lost houses under the inclusion rules");
  }

  ParameterSet& truth = out.truth;
  truth = spec.hyper;
  truth.alpha1.assign(R, 0.0);
  truth.beta1.assign(R, 0.0);
  truth.tau1_sq.assign(R, 0.0);
  truth.alpha2.assign(R, 0.0);
  truth.beta2.assign(R, 0.0);
  truth.tau2_sq.assign(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    const std::string label = data.races[r].label();
    const auto it = std::find_if(spec.races.begin(), spec.races.end(),
                                 [&](const RaceSpec& s) { return race_label(s) == label; });
    const RaceTruth& tr = truths[static_cast<std::size_t>(it - spec.races.begin())];
    truth.alpha1[r] = tr.alpha1;
    truth.beta1[r] = tr.beta1;
    truth.tau1_sq[r] = tr.tau1_sq;
    truth.alpha2[r] = tr.alpha2;
    truth.beta2[r] = tr.beta2;
    truth.tau2_sq[r] = tr.tau2_sq;
  }
  truth.gamma.assign(data.group_count(), 0.0);
  for (std::size_t g = 0; g < data.group_count(); ++g) {
    truth.gamma[g] = gamma_for(spec, data.group_year(g), data.group_margin(g));
  }
  truth.kappa.assign(data.house_count(), 0.0);
  for (std::size_t h = 0; h < data.house_count(); ++h) {
    for (const HouseSpec& hs : spec.houses) {
      if (hs.name == data.houses[h]) truth.kappa[h] = hs.kappa;
    }
  }
  truth.phi.assign(data.year_count(), 0.0);
  for (std::size_t y = 0; y < data.year_count(); ++y) truth.phi[y] = phi_for(spec, data.years[y]);
  return out;
}

ScenarioSpec recovery_scenario(std::uint64_t seed) {
  static const char* const kStates[] = {"AL", "AK", "AZ", "AR", "CA", "CO", "CT",
                                        "DE", "FL", "GA", "HI", "ID", "IL", "IN",
                                        "IA", "KS", "KY", "LA", "ME", "MD"};
  ScenarioSpec spec;
  spec.seed = seed;
  spec.polls_per_race = 12;
  spec.sample_size_min = 500;
  spec.sample_size_max = 1500;
  Engine rng = stream(seed, 0xBEEF, 0);
  // 7 strong Republican, 7 close, 6 strong Democratic races.
  for (std::size_t r = 0; r < 20; ++r) {
    RaceSpec race;
    race.state = kStates[r];
    race.year = 2016;
    if (r < 7) {
      race.outcome = uniform(rng, 0.56, 0.65);
    } else if (r < 14) {
      race.outcome = uniform(rng, 0.48, 0.52);
    } else {
      race.outcome = uniform(rng, 0.35, 0.44);
    }
    race.alpha1 = uniform(rng, -0.1, 0.1);
    race.beta1 = uniform(rng, -0.05, 0.05);
    race.tau1_sq = 1e-4;
    race.alpha2 = uniform(rng, 0.03, 0.16);
    race.beta2 = uniform(rng, 0.0, 0.03);
    race.tau2_sq = 2.5e-5;
    spec.races.push_back(race);
  }
  spec.gamma_by_margin = {{MarginGroup::StrongRep, 0.0},
                          {MarginGroup::Close, 0.5},
                          {MarginGroup::StrongDem, 1.0}};
  spec.houses = {{"House A", -0.04, 30},
                 {"House B", -0.02, 30},
                 {"House C", 0.0, 30},
                 {"House D", 0.02, 30},
                 {"House E", 0.04, 30}};
  spec.phi = {{2016, 0.09}};
  spec.hyper.sigma1_alpha = 0.06;
  spec.hyper.sigma1_beta = 0.03;
  spec.hyper.sigma1_tau = 1e-4;
  spec.hyper.sigma_kappa = 0.03;
  spec.hyper.sigma2_alpha = 0.04;
  spec.hyper.mu2_beta = 0.015;
  spec.hyper.sigma2_beta = 0.009;
  spec.hyper.sigma2_tau = 2.5e-5;
  return spec;
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  if (j.contains("recovery_seed")) spec = recovery_scenario(j.at("recovery_seed").get<std::uint64_t>());
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("mode")) spec.mode = parse_allocation_mode(j.at("mode").get<std::string>());
  spec.window_days = j.value("window_days", spec.window_days);
  spec.polls_per_race = j.value("polls_per_race", spec.polls_per_race);
  if (j.contains("sample_size")) {
    const auto& s = j.at("sample_size");
    if (!s.is_array() || s.size() != 2) throw ScenarioError("sample_size must be [min, max]");
    spec.sample_size_min = s[0].get<std::int64_t>();
    spec.sample_size_max = s[1].get<std::int64_t>();
  }
  spec.undecided_reporting = j.value("undecided_reporting", spec.undecided_reporting);
  spec.min_polls_per_race = j.value("min_polls_per_race", spec.min_polls_per_race);
  spec.min_polls_per_house = j.value("min_polls_per_house", spec.min_polls_per_house);
  if (j.contains("races")) {
    spec.races.clear();
    for (const auto& r : j.at("races")) {
      RaceSpec race;
      race.state = r.at("state").get<std::string>();
      race.year = r.at("year").get<int>();
      race.outcome = r.at("outcome").get<double>();
      read_optional(r, "alpha1", race.alpha1);
      read_optional(r, "beta1", race.beta1);
      read_optional(r, "tau1_sq", race.tau1_sq);
      read_optional(r, "alpha2", race.alpha2);
      read_optional(r, "beta2", race.beta2);
      read_optional(r, "tau2_sq", race.tau2_sq);
      spec.races.push_back(race);
    }
  }
  if (j.contains("houses")) {
    spec.houses.clear();
    for (const auto& h : j.at("houses")) {
      spec.houses.push_back({h.at("name").get<std::string>(), h.value("kappa", 0.0),
                             h.at("polls").get<std::size_t>()});
    }
  }
  if (j.contains("gamma")) {
    spec.gamma_by_margin.clear();
    spec.gamma_by_group.clear();
    for (const auto& [key, value] : j.at("gamma").items()) {
      if (key == "StrongRep" || key == "Close" || key == "StrongDem") {
        spec.gamma_by_margin[parse_margin_group(key)] = value.get<double>();
      } else {
        spec.gamma_by_group[key] = value.get<double>();
      }
    }
  }
  if (j.contains("phi")) {
    spec.phi.clear();
    for (const auto& [key, value] : j.at("phi").items()) spec.phi[std::stoi(key)] = value.get<double>();
  }
  if (j.contains("hyper")) {
    const auto& hyper = j.at("hyper");
    for (const auto& [key, value] : hyper.items()) {
      bool found = false;
      for_each_field(spec.hyper, [&](std::string_view name, std::span<double> field) {
        if (name == key && field.size() == 1) {
          field[0] = value.get<double>();
          found = true;
        }
      });
      if (!found) throw ScenarioError("unknown hyperparameter " + key);
    }
  }
  return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["mode"] = std::string(to_string(spec.mode));
  j["window_days"] = spec.window_days;
  j["polls_per_race"] = spec.polls_per_race;
  j["sample_size"] = {spec.sample_size_min, spec.sample_size_max};
  j["undecided_reporting"] = spec.undecided_reporting;
  j["min_polls_per_race"] = spec.min_polls_per_race;
  j["min_polls_per_house"] = spec.min_polls_per_house;
  nlohmann::json races = nlohmann::json::array();
  for (const RaceSpec& r : spec.races) {
    nlohmann::json race = {{"state", r.state}, {"year", r.year}, {"outcome", r.outcome}};
    const std::pair<const char*, const std::optional<double>*> fields[] = {
        {"alpha1", &r.alpha1}, {"beta1", &r.beta1}, {"tau1_sq", &r.tau1_sq},
        {"alpha2", &r.alpha2}, {"beta2", &r.beta2}, {"tau2_sq", &r.tau2_sq}};
    for (const auto& [name, value] : fields) {
      if (*value) race[name] = **value;
    }
    races.push_back(race);
  }
  j["races"] = races;
  nlohmann::json houses = nlohmann::json::array();
  for (const HouseSpec& h : spec.houses) {
    houses.push_back({{"name", h.name}, {"kappa", h.kappa}, {"polls", h.polls}});
  }
  j["houses"] = houses;
  nlohmann::json gamma = nlohmann::json::object();
  for (const auto& [m, v] : spec.gamma_by_margin) gamma[std::string(to_string(m))] = v;
  for (const auto& [label, v] : spec.gamma_by_group) gamma[label] = v;
  j["gamma"] = gamma;
  nlohmann::json phi = nlohmann::json::object();
  for (const auto& [year, v] : spec.phi) phi[std::to_string(year)] = v;
  j["phi"] = phi;
  nlohmann::json hyper = nlohmann::json::object();
  for_each_field(spec.hyper, [&](std::string_view name, std::span<const double> field) {
    if (field.size() == 1) hyper[std::string(name)] = field[0];
  });
  j["hyper"] = hyper;
  return j;
}

}  // namespace pollbias::synthetic
