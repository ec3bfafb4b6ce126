#include "pollbias/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "pollbias/csv.hpp"
#include "pollbias/draws.hpp"
#include "pollbias/summaries.hpp"
#include "pollbias/synthetic.hpp"

#ifndef POLLBIAS_VERSION
#define POLLBIAS_VERSION "unknown"
#endif

namespace pollbias::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
}

std::string file_hash(const std::string& path) { return fnv1a_hex(read_text(path)); }

const char* units_name(ShareUnits u) { return u == ShareUnits::Percent ? "percent" : "fraction"; }

json priors_json(const PriorConfig& p) {
  return {{"mu1_alpha_sd", p.mu1_alpha_sd},
          {"sigma1_alpha_scale", p.sigma1_alpha_scale},
          {"mu1_beta_sd", p.mu1_beta_sd},
          {"sigma1_beta_scale", p.sigma1_beta_scale},
          {"sigma1_tau_scale", p.sigma1_tau_scale},
          {"gamma_scale", p.gamma_scale},
          {"mu_kappa_sd", p.mu_kappa_sd},
          {"sigma_kappa_mean", p.sigma_kappa_mean},
          {"phi_mean", p.phi_mean},
          {"phi_sd", p.phi_sd},
          {"sigma2_alpha_scale", p.sigma2_alpha_scale},
          {"mu2_beta_sd", p.mu2_beta_sd},
          {"sigma2_beta_scale", p.sigma2_beta_scale},
          {"sigma2_tau_scale", p.sigma2_tau_scale}};
}

void apply_priors(PriorConfig& p, const json& j) {
  std::map<std::string, double*> fields = {{"mu1_alpha_sd", &p.mu1_alpha_sd},
                                           {"sigma1_alpha_scale", &p.sigma1_alpha_scale},
                                           {"mu1_beta_sd", &p.mu1_beta_sd},
                                           {"sigma1_beta_scale", &p.sigma1_beta_scale},
                                           {"sigma1_tau_scale", &p.sigma1_tau_scale},
                                           {"gamma_scale", &p.gamma_scale},
                                           {"mu_kappa_sd", &p.mu_kappa_sd},
                                           {"sigma_kappa_mean", &p.sigma_kappa_mean},
                                           {"phi_mean", &p.phi_mean},
                                           {"phi_sd", &p.phi_sd},
                                           {"sigma2_alpha_scale", &p.sigma2_alpha_scale},
                                           {"mu2_beta_sd", &p.mu2_beta_sd},
                                           {"sigma2_beta_scale", &p.sigma2_beta_scale},
                                           {"sigma2_tau_scale", &p.sigma2_tau_scale}};
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw UsageError("unknown prior setting " + key);
    *it->second = value.get<double>();
  }
  p.validate();
}

struct Loaded {
  ParsedPolls polls;
  ParsedResults results;
  Preparation prep;
  std::string dataset_hash;
};

// Parses and filters the inputs, writing prepared.csv, rejects.csv,
// results_rejects.csv and excluded.csv under cfg.out.
Loaded load_dataset(const RunConfig& cfg) {
  if (cfg.polls.empty()) throw UsageError("--polls is required");
  if (cfg.results.empty()) throw UsageError("--results is required");
  Loaded l;
  PollSchema schema;
  schema.units = cfg.units;
  l.polls = parse_polls(cfg.polls, schema);
  l.results = parse_results(cfg.results);
  l.prep = prepare_dataset(l.polls.polls, l.results.results, cfg.prepare);
  const fs::path dir(cfg.out);
  std::vector<Reject> rejects = l.polls.rejects;
  rejects.insert(rejects.end(), l.prep.rejects.begin(), l.prep.rejects.end());
  write_rejects_csv((dir / "rejects.csv").string(), rejects);
  write_rejects_csv((dir / "results_rejects.csv").string(), l.results.rejects);
  write_exclusions_csv((dir / "excluded.csv").string(), l.prep.exclusions);
  write_prepared_csv((dir / "prepared.csv").string(), l.prep.dataset);
  l.dataset_hash = file_hash((dir / "prepared.csv").string());
  return l;
}

json base_manifest(const RunConfig& cfg) {
  const json config = cfg.to_json();
  json m;
  m["command"] = cfg.command;
  m["version"] = POLLBIAS_VERSION;
  m["config"] = config;
  // Paths are left out; input contents are hashed below.
  json settings = config;
  for (const char* key : {"polls", "results", "national", "scenario", "out", "quiet"}) settings.erase(key);
  m["config_hash"] = fnv1a_hex(settings.dump());
  m["seed"] = cfg.sampler.seed;
  json inputs = json::object();
  for (const auto& [name, path] : {std::pair{"polls", cfg.polls}, std::pair{"results", cfg.results},
                                   std::pair{"national", cfg.national},
                                   std::pair{"scenario", cfg.scenario}}) {
    if (!path.empty() && fs::exists(path)) inputs[name] = {{"path", path}, {"fnv1a", file_hash(path)}};
  }
  m["inputs"] = inputs;
  return m;
}

void write_manifest(const RunConfig& cfg, const json& manifest) {
  write_text(fs::path(cfg.out) / (cfg.command + "_manifest.json"), manifest.dump(2) + "\n");
}

json counts_json(const Loaded& l) {
  return {{"polls_read", l.polls.polls.size() + l.polls.rejects.size()},
          {"polls_rejected", l.polls.rejects.size() + l.prep.rejects.size()},
          {"polls_excluded", l.prep.exclusions.size()},
          {"polls", l.prep.dataset.polls.size()},
          {"races", l.prep.dataset.race_count()},
          {"groups", l.prep.dataset.group_count()},
          {"houses", l.prep.dataset.house_count()},
          {"results_rejected", l.results.rejects.size()}};
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  const Loaded l = load_dataset(cfg);
  json m = base_manifest(cfg);
  m["counts"] = counts_json(l);
  m["dataset_hash"] = l.dataset_hash;
  write_manifest(cfg, m);
  if (!cfg.quiet) {
    const auto& c = m["counts"];
    out << "ingest: " << c["polls"] << " polls in " << c["races"] << " races, " << c["houses"]
        << " houses; " << c["polls_rejected"] << " rejected, " << c["polls_excluded"]
        << " excluded\n";
  }
  return 0;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Loaded l = load_dataset(cfg);
  const PosteriorModel model(l.prep.dataset, cfg.priors, cfg.variant);
  PosteriorDraws draws = fit_posterior(model, cfg.sampler);
  const fs::path dir(cfg.out);
  write_draws_csv((dir / "draws.csv").string(), draws);
  const json diag = diagnostics_json(draws);
  write_text(dir / "diagnostics.json", diag.dump(2) + "\n");

  json m = base_manifest(cfg);
  m["counts"] = counts_json(l);
  m["dataset_hash"] = l.dataset_hash;
  m["draws_fnv1a"] = file_hash((dir / "draws.csv").string());
  m["converged"] = draws.diagnostics.converged;
  m["status"] = draws.diagnostics.converged ? "converged" : "not converged";
  m["unreliable"] = draws.unreliable;
  m["divergences"] = diag["divergences"];
  m["max_rhat"] = diag["max_rhat"];
  m["min_ess_bulk"] = diag["min_ess_bulk"];
  write_manifest(cfg, m);

  if (!draws.diagnostics.converged) {
    err << "warning: not converged (max R-hat " << diag["max_rhat"] << " > "
        << diagnostics::kRhatThreshold << ")\n";
  }
  if (draws.unreliable) err << "warning: more than 10% of transitions diverged\n";
  if (!cfg.quiet) {
    out << "fit: " << draws.chains << " chains x " << draws.samples << " draws, "
        << model.dimension() << " parameters; max R-hat " << diag["max_rhat"]
        << ", min bulk ESS " << diag["min_ess_bulk"] << ", divergences " << diag["divergences"]
        << "\n";
  }
  return 0;
}

std::vector<summaries::NationalSeries> load_national(const RunConfig& cfg,
                                                     const PreparedDataset& data) {
  std::vector<summaries::NationalSeries> series;
  if (cfg.national.empty()) return series;
  PollSchema schema;
  schema.units = cfg.units;
  const ParsedPolls parsed = parse_polls(cfg.national, schema);
  std::map<int, std::vector<PollRecord>> by_year;
  for (const PollRecord& p : parsed.polls) by_year[p.year].push_back(p);
  for (auto& [year, polls] : by_year) {
    Date election = synthetic::election_day(year);
    for (const RaceResult& r : data.races) {
      if (r.year == year) {
        election = r.election_date;
        break;
      }
    }
    series.push_back({year, election, std::move(polls)});
  }
  return series;
}

int cmd_summarize(const RunConfig& flags, bool mode_given, std::ostream& out, std::ostream& err) {
  const fs::path dir(flags.out);
  const fs::path manifest_path = dir / "fit_manifest.json";
  if (!fs::exists(manifest_path)) {
    throw UsageError("no fit_manifest.json under " + flags.out + "; run fit first");
  }
  const json fit = read_json(manifest_path.string());
  RunConfig cfg = RunConfig::from_json(fit.at("config"));
  cfg.command = "summarize";
  cfg.out = flags.out;
  cfg.quiet = flags.quiet;
  if (!flags.national.empty()) cfg.national = flags.national;
  if (mode_given && flags.prepare.mode != cfg.prepare.mode) {
    throw UsageError("--mode " + std::string(to_string(flags.prepare.mode)) +
                     " does not match the fit's allocation mode " +
                     std::string(to_string(cfg.prepare.mode)));
  }

  const Loaded l = load_dataset(cfg);
  if (l.dataset_hash != fit.at("dataset_hash").get<std::string>()) {
    throw std::runtime_error("prepared dataset differs from the one recorded at fit time");
  }
  const bool converged = fit.value("converged", false);
  if (!converged) {
    err << "\n*** WARNING: the fit in " << cfg.out
        << " did not converge; summaries below are not trustworthy ***\n\n";
  }
  const PosteriorDraws draws = read_draws_csv((dir / "draws.csv").string());
  const ParameterLayout layout = ParameterLayout::for_dataset(l.prep.dataset, cfg.variant);
  const std::vector<ParameterSet> sets = to_parameter_sets(draws, layout);
  const auto national = load_national(cfg, l.prep.dataset);
  const summaries::SummaryBundle bundle =
      summaries::compute(sets, l.prep.dataset, cfg.variant, national);
  summaries::write_outputs(cfg.out, bundle,
                           {{"converged", converged},
                            {"unreliable", fit.value("unreliable", false)},
                            {"fit_config_hash", fit.at("config_hash")}});

  json m = base_manifest(cfg);
  m["fit_manifest_fnv1a"] = file_hash(manifest_path.string());
  m["draws_fnv1a"] = file_hash((dir / "draws.csv").string());
  m["report_fnv1a"] = file_hash((dir / "report.json").string());
  m["converged"] = converged;
  write_manifest(cfg, m);
  if (!cfg.quiet) {
    out << "summarize: " << bundle.draws << " draws, " << bundle.bias_rows.size()
        << " races; outputs in " << cfg.out << "\n";
  }
  return 0;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir(cfg.out);
  const fs::path report_path = dir / "report.json";
  if (!fs::exists(report_path)) throw UsageError("no report.json under " + cfg.out + "; run summarize first");
  const std::string md = summaries::render_markdown(read_json(report_path.string()));
  write_text(dir / "report.md", md);
  json m = base_manifest(cfg);
  m["report_json_fnv1a"] = file_hash(report_path.string());
  m["report_md_fnv1a"] = fnv1a_hex(md);
  write_manifest(cfg, m);
  if (!cfg.quiet) out << md;
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const CLI::App& app, std::ostream& out) {
  synthetic::ScenarioSpec spec = cfg.scenario.empty()
                                     ? synthetic::recovery_scenario(cfg.sampler.seed)
                                     : synthetic::scenario_from_json(read_json(cfg.scenario));
  if (app.count("--seed")) spec.seed = cfg.sampler.seed;
  if (app.count("--mode")) spec.mode = cfg.prepare.mode;
  const synthetic::Generated g = synthetic::generate(spec);
  const fs::path dir(cfg.out);
  write_polls_csv((dir / "polls.csv").string(), g.polls, cfg.units);
  write_results_csv((dir / "results.csv").string(), g.results);
  write_text(dir / "scenario.json", synthetic::scenario_to_json(spec).dump(2) + "\n");
  const ParameterLayout layout = ParameterLayout::for_dataset(g.preparation.dataset);
  {
    std::ofstream truth(dir / "truth.csv", std::ios::binary);
    if (!truth) throw std::runtime_error("cannot write truth.csv");
    csv::write_row(truth, {"name", "value"});
    const auto names = layout.names();
    const auto flat = layout.to_flat(g.truth);
    for (std::size_t k = 0; k < names.size(); ++k) {
      csv::write_row(truth, {names[k], csv::format_double(flat[k])});
    }
  }
  json m = base_manifest(cfg);
  m["scenario"] = synthetic::scenario_to_json(spec);
  m["polls"] = g.polls.size();
  m["races"] = g.results.size();
  m["truncation_fraction"] = g.truncation_fraction();
  m["share_units"] = units_name(cfg.units);
  write_manifest(cfg, m);
  if (!cfg.quiet) {
    out << "simulate: " << g.polls.size() << " polls in " << g.results.size()
        << " races, truncation fraction " << g.truncation_fraction() << "\n";
  }
  return 0;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json RunConfig::to_json() const {
  return {{"polls", polls},
          {"results", results},
          {"national", national},
          {"scenario", scenario},
          {"share_units", units_name(units)},
          {"model", std::string(pollbias::to_string(variant))},
          {"mode", std::string(pollbias::to_string(prepare.mode))},
          {"window_days", prepare.window_days},
          {"min_polls_race", prepare.min_polls_per_race},
          {"min_polls_house", prepare.min_polls_per_house},
          {"chains", sampler.chains},
          {"warmup", sampler.warmup},
          {"samples", sampler.samples},
          {"seed", sampler.seed},
          {"target_accept", sampler.target_accept},
          {"max_treedepth", sampler.max_treedepth},
          {"priors", priors_json(priors)}};
}

RunConfig RunConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {
      "polls",  "results", "national",   "scenario",     "share_units",   "model",
      "mode",   "window_days", "min_polls_race", "min_polls_house", "chains", "warmup",
      "samples", "seed",   "target_accept", "max_treedepth", "priors", "out", "quiet"};
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config key " + key);
    }
  }
  RunConfig c;
  c.polls = j.value("polls", c.polls);
  c.results = j.value("results", c.results);
  c.national = j.value("national", c.national);
  c.scenario = j.value("scenario", c.scenario);
  c.out = j.value("out", c.out);
  c.quiet = j.value("quiet", c.quiet);
  if (j.contains("share_units")) c.units = parse_share_units(j["share_units"].get<std::string>());
  if (j.contains("model")) c.variant = parse_model_variant(j["model"].get<std::string>());
  if (j.contains("mode")) c.prepare.mode = parse_allocation_mode(j["mode"].get<std::string>());
  c.prepare.window_days = j.value("window_days", c.prepare.window_days);
  c.prepare.min_polls_per_race = j.value("min_polls_race", c.prepare.min_polls_per_race);
  c.prepare.min_polls_per_house = j.value("min_polls_house", c.prepare.min_polls_per_house);
  c.sampler.chains = j.value("chains", c.sampler.chains);
  c.sampler.warmup = j.value("warmup", c.sampler.warmup);
  c.sampler.samples = j.value("samples", c.sampler.samples);
  c.sampler.seed = j.value("seed", c.sampler.seed);
  c.sampler.target_accept = j.value("target_accept", c.sampler.target_accept);
  c.sampler.max_treedepth = j.value("max_treedepth", c.sampler.max_treedepth);
  if (j.contains("priors")) apply_priors(c.priors, j["priors"]);
  return c;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Total-survey-error model of state election polls", "pollbias"};
  app.set_version_flag("--version", POLLBIAS_VERSION);
  std::string command, config_path, mode, units, model;
  RunConfig flags;
  int window = 0, min_race = 0, min_house = 0;
  std::size_t chains = 0, warmup = 0, samples = 0;
  std::uint64_t seed = 0;

  app.add_option("command", command, "ingest | fit | summarize | simulate | report")
      ->required()
      ->check(CLI::IsMember({"ingest", "fit", "summarize", "simulate", "report"}));
  app.add_option("--config", config_path, "JSON file with any of the settings below");
  app.add_option("--polls", flags.polls, "state polls CSV");
  app.add_option("--results", flags.results, "election results CSV");
  app.add_option("--national", flags.national, "national polls CSV for the undecided series");
  app.add_option("--scenario", flags.scenario, "scenario JSON for simulate");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--mode", mode, "undecided allocation")
      ->check(CLI::IsMember({"proportional", "even"}));
  app.add_option("--share-units", units, "units of share columns")
      ->check(CLI::IsMember({"percent", "fraction"}));
  app.add_option("--model", model, "poll model")->check(CLI::IsMember({"extended", "baseline"}));
  app.add_option("--chains", chains)->check(CLI::PositiveNumber);
  app.add_option("--warmup", warmup);
  app.add_option("--samples", samples)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  app.add_option("--window-days", window)->check(CLI::PositiveNumber);
  app.add_option("--min-polls-race", min_race)->check(CLI::PositiveNumber);
  app.add_option("--min-polls-house", min_house)->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", flags.quiet, "suppress progress output");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? RunConfig{} : RunConfig::from_json(read_json(config_path));
    cfg.command = command;
    if (app.count("--polls")) cfg.polls = flags.polls;
    if (app.count("--results")) cfg.results = flags.results;
    if (app.count("--national")) cfg.national = flags.national;
    if (app.count("--scenario")) cfg.scenario = flags.scenario;
    if (app.count("--out")) cfg.out = flags.out;
    if (app.count("--quiet")) cfg.quiet = flags.quiet;
    if (!mode.empty()) cfg.prepare.mode = parse_allocation_mode(mode);
    if (!units.empty()) cfg.units = parse_share_units(units);
    if (!model.empty()) cfg.variant = parse_model_variant(model);
    if (app.count("--chains")) cfg.sampler.chains = chains;
    if (app.count("--warmup")) cfg.sampler.warmup = warmup;
    if (app.count("--samples")) cfg.sampler.samples = samples;
    if (app.count("--seed")) cfg.sampler.seed = seed;
    if (app.count("--window-days")) cfg.prepare.window_days = window;
    if (app.count("--min-polls-race")) cfg.prepare.min_polls_per_race = static_cast<std::size_t>(min_race);
    if (app.count("--min-polls-house")) cfg.prepare.min_polls_per_house = static_cast<std::size_t>(min_house);
    cfg.sampler.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    fs::create_directories(cfg.out);
    if (command == "ingest") return cmd_ingest(cfg, out);
    if (command == "fit") return cmd_fit(cfg, out, err);
    if (command == "summarize") return cmd_summarize(cfg, !mode.empty(), out, err);
    if (command == "report") return cmd_report(cfg, out);
    return cmd_simulate(cfg, app, out);
  } catch (const std::exception& e) {
    const bool usage = dynamic_cast<const UsageError*>(&e) != nullptr;
    json error = {{"command", command},
                  {"error", e.what()},
                  {"kind", usage                                        ? "usage"
                           : dynamic_cast<const DataError*>(&e)         ? "data"
                           : dynamic_cast<const csv::CsvError*>(&e)     ? "data"
                           : dynamic_cast<const SamplerError*>(&e)      ? "sampler"
                                                                        : "runtime"},
                  {"version", POLLBIAS_VERSION}};
    try {
      write_text(fs::path(cfg.out) / "error.json", error.dump(2) + "\n");
    } catch (const std::exception&) {
    }
    err << "error: " << e.what() << "\n";
    return usage ? 2 : 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace pollbias::cli
