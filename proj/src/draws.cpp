#include "pollbias/draws.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pollbias/csv.hpp"

namespace pollbias {

std::size_t PosteriorDraws::column(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return k;
  throw std::out_of_range("no draws column '" + name + "'");
}

diagnostics::ChainDraws PosteriorDraws::by_chain(std::size_t k) const {
  diagnostics::ChainDraws out(chains, std::vector<double>(samples));
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t s = 0; s < samples; ++s) out[c][s] = row(c, s)[k];
  return out;
}

void compute_diagnostics(PosteriorDraws& draws) {
  if (draws.samples < 4) {
    draws.diagnostics = {};
    draws.diagnostics.warnings.push_back("fewer than 4 draws per chain: diagnostics skipped");
    return;
  }
  std::vector<std::vector<std::vector<double>>> nested(draws.chains);
  for (std::size_t c = 0; c < draws.chains; ++c)
    for (std::size_t s = 0; s < draws.samples; ++s) nested[c].push_back(draws.row(c, s));
  draws.diagnostics = diagnostics::summarize(nested, draws.names);
}

PosteriorDraws fit_posterior(const PosteriorModel& model, const SamplerConfig& config) {
  const SamplerRun run = run_nuts(as_log_density(model), config);
  const ParameterLayout& layout = model.layout();
  PosteriorDraws out;
  out.names = layout.names();
  out.chains = config.chains;
  out.samples = config.samples;
  out.unreliable = run.unreliable;
  for (const ChainResult& chain : run.chains) {
    for (const auto& x : chain.draws) {
      std::vector<double> row(x);
      for (const auto& b : layout.blocks())
        if (b.positive)
          for (std::size_t i = b.offset; i < b.offset + b.size; ++i) row[i] = std::exp(row[i]);
      out.rows.push_back(std::move(row));
    }
    out.chain_stats.push_back({chain.step_size, chain.divergences, chain.treedepth_hits,
                               chain.leapfrog_steps, chain.mean_accept_stat});
  }
  compute_diagnostics(out);
  return out;
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  csv::Row header{"chain", "iteration"};
  header.insert(header.end(), draws.names.begin(), draws.names.end());
  csv::write_row(out, header);
  std::string line;
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t s = 0; s < draws.samples; ++s) {
      line = std::to_string(c) + "," + std::to_string(s);
      for (double v : draws.row(c, s)) {
        line += ',';
        line += csv::format_double(v);
      }
      line += '\n';
      out << line;
    }
  }
}

PosteriorDraws read_draws_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (table.header.size() < 3 || table.header[0] != "chain" || table.header[1] != "iteration")
    throw std::runtime_error("'" + path + "' is not a draws file");
  PosteriorDraws d;
  d.names.assign(table.header.begin() + 2, table.header.end());
  std::size_t max_chain = 0;
  std::vector<std::size_t> per_chain;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const csv::Row& r = table.rows[k];
    if (r.size() != table.header.size())
      throw std::runtime_error("draws line " + std::to_string(table.lines[k]) + ": wrong field count");
    const std::size_t chain = std::stoul(r[0]);
    const std::size_t iter = std::stoul(r[1]);
    if (chain >= per_chain.size()) per_chain.resize(chain + 1, 0);
    if (iter != per_chain[chain])
      throw std::runtime_error("draws must be chain-major with consecutive iterations");
    if (chain < max_chain) throw std::runtime_error("draws must be chain-major");
    max_chain = chain;
    ++per_chain[chain];
    std::vector<double> row(d.names.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      const std::string& f = r[j + 2];
      auto res = std::from_chars(f.data(), f.data() + f.size(), row[j]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw std::runtime_error("draws line " + std::to_string(table.lines[k]) +
                                 ": unparseable value '" + f + "'");
    }
    d.rows.push_back(std::move(row));
  }
  if (per_chain.empty()) throw std::runtime_error("draws file has no rows");
  for (std::size_t n : per_chain)
    if (n != per_chain.front()) throw std::runtime_error("chains have unequal draw counts");
  d.chains = per_chain.size();
  d.samples = per_chain.front();
  compute_diagnostics(d);
  return d;
}

nlohmann::json diagnostics_json(const PosteriorDraws& draws) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json chains = json::array();
  std::size_t divergences = 0;
  for (const ChainStats& c : draws.chain_stats) {
    divergences += c.divergences;
    chains.push_back({{"step_size", c.step_size},
                      {"divergences", c.divergences},
                      {"treedepth_hits", c.treedepth_hits},
                      {"leapfrog_steps", c.leapfrog_steps},
                      {"mean_accept_stat", c.mean_accept_stat}});
  }
  json params = json::array();
  for (const auto& p : draws.diagnostics.parameters)
    params.push_back({{"name", p.name},
                      {"mean", num(p.mean)},
                      {"sd", num(p.sd)},
                      {"rhat", num(p.rhat)},
                      {"ess_bulk", num(p.ess_bulk)}});
  return {{"chains", draws.chains},
          {"samples", draws.samples},
          {"divergences", divergences},
          {"unreliable", draws.unreliable},
          {"max_rhat", num(draws.diagnostics.max_rhat)},
          {"min_ess_bulk", num(draws.diagnostics.min_ess_bulk)},
          {"converged", draws.diagnostics.converged},
          {"warnings", draws.diagnostics.warnings},
          {"per_chain", chains},
          {"parameters", params}};
}

std::vector<ParameterSet> to_parameter_sets(const PosteriorDraws& draws,
                                            const ParameterLayout& layout) {
  if (draws.names != layout.names())
    throw std::invalid_argument("draws columns do not match the dataset's parameter layout");
  std::vector<ParameterSet> out;
  out.reserve(draws.rows.size());
  for (const auto& row : draws.rows) out.push_back(layout.from_flat(row));
  return out;
}

}  // namespace pollbias
