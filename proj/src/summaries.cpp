#include "pollbias/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pollbias/csv.hpp"
#include "pollbias/posterior.hpp"

namespace pollbias {

std::string_view to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::All: return "all";
    case BiasKind::ElectionDay: return "election_day";
    case BiasKind::Undecided: return "undecided";
    case BiasKind::House: return "house";
  }
  return "unknown";
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summary of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (sorted.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  auto q = [&](double p) {
    const double h = (n - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
  };
  s.q025 = q(0.025);
  s.q25 = q(0.25);
  s.q75 = q(0.75);
  s.q975 = q(0.975);
  return s;
}

namespace summaries {
namespace {

double logit_v(const PreparedDataset& data, std::size_t i) {
  return logit(data.races[data.polls[i].race].two_party_outcome);
}

double house_effect(const ParameterSet& draw, const PreparedPoll& poll) {
  return poll.house ? draw.kappa[*poll.house] : 0.0;
}

double undecided_term(const ParameterSet& draw, const PreparedDataset& data, std::size_t i) {
  const std::size_t r = data.polls[i].race;
  return -kUndecidedPredictorScale * draw.alpha2[r] * draw.gamma[data.race_group[r]];
}

void check_draw(const ParameterSet& draw, const PreparedDataset& data) {
  const std::size_t R = data.race_count();
  if (draw.alpha1.size() != R || draw.beta1.size() != R || draw.tau1_sq.size() != R ||
      draw.alpha2.size() != R || draw.gamma.size() != data.group_count() ||
      draw.kappa.size() != data.house_count()) {
    throw std::invalid_argument("draw dimensions do not match dataset");
  }
}

std::string pct(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

}  // namespace

double poll_predictor(const ParameterSet& draw, const PreparedDataset& data, std::size_t i,
                      BiasKind kind) {
  const PreparedPoll& poll = data.polls[i];
  const std::size_t r = poll.race;
  double eta = logit_v(data, i);
  switch (kind) {
    case BiasKind::All:
      eta += draw.alpha1[r] + poll.t * draw.beta1[r] + undecided_term(draw, data, i) +
             house_effect(draw, poll);
      break;
    case BiasKind::ElectionDay:
      eta += draw.alpha1[r] + undecided_term(draw, data, i) + house_effect(draw, poll);
      break;
    case BiasKind::Undecided:
      eta += undecided_term(draw, data, i);
      break;
    case BiasKind::House:
      eta += house_effect(draw, poll);
      break;
  }
  return inv_logit(eta);
}

std::vector<double> race_bias(const ParameterSet& draw, const PreparedDataset& data,
                              BiasKind kind) {
  check_draw(draw, data);
  std::vector<double> sum(data.race_count(), 0.0);
  std::vector<std::size_t> count(data.race_count(), 0);
  for (std::size_t i = 0; i < data.polls.size(); ++i) {
    const std::size_t r = data.polls[i].race;
    sum[r] += poll_predictor(draw, data, i, kind) - data.races[r].two_party_outcome;
    ++count[r];
  }
  std::vector<double> out(data.race_count(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (count[r] > 0) out[r] = 100.0 * sum[r] / static_cast<double>(count[r]);
  }
  return out;
}

double average_abs_bias(std::span<const double> per_race, std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("average over an empty race set");
  double total = 0.0;
  for (std::size_t r : subset) {
    if (r >= per_race.size()) throw std::out_of_range("race index outside per-race vector");
    total += std::abs(per_race[r]);
  }
  return total / static_cast<double>(subset.size());
}

std::vector<double> race_sd(const ParameterSet& draw, const PreparedDataset& data) {
  check_draw(draw, data);
  std::vector<double> sum(data.race_count(), 0.0);
  std::vector<std::size_t> count(data.race_count(), 0);
  for (std::size_t i = 0; i < data.polls.size(); ++i) {
    const PreparedPoll& poll = data.polls[i];
    const double p = poll_predictor(draw, data, i, BiasKind::All);
    const double n = static_cast<double>(poll.source.sample_size);
    sum[poll.race] += std::sqrt(p * (1.0 - p) / n + draw.tau1_sq[poll.race]);
    ++count[poll.race];
  }
  std::vector<double> out(data.race_count(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (count[r] > 0) out[r] = 100.0 * sum[r] / static_cast<double>(count[r]);
  }
  return out;
}

double average_sd(const ParameterSet& draw, const PreparedDataset& data,
                  std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("average over an empty race set");
  const auto sd = race_sd(draw, data);
  double total = 0.0;
  for (std::size_t r : subset) total += sd.at(r);
  return total / static_cast<double>(subset.size());
}

std::vector<HouseRow> house_table(std::span<const ParameterSet> draws,
                                  const PreparedDataset& data) {
  if (draws.empty()) throw std::invalid_argument("house table needs at least one draw");
  const std::size_t H = data.house_count();
  std::vector<std::vector<std::size_t>> members(H);
  for (std::size_t i = 0; i < data.polls.size(); ++i) {
    if (data.polls[i].house) members[*data.polls[i].house].push_back(i);
  }
  std::vector<HouseRow> rows;
  rows.reserve(H);
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> bias, kappa;
    bias.reserve(draws.size());
    kappa.reserve(draws.size());
    for (const ParameterSet& d : draws) {
      check_draw(d, data);
      double total = 0.0;
      for (std::size_t i : members[h]) {
        const double v = data.races[data.polls[i].race].two_party_outcome;
        total += inv_logit(logit(v) + d.kappa[h]) - v;
      }
      bias.push_back(members[h].empty() ? 0.0
                                        : 100.0 * total / static_cast<double>(members[h].size()));
      kappa.push_back(d.kappa[h]);
    }
    rows.push_back({data.houses[h], members[h].size(), summarize(bias), summarize(kappa)});
  }
  return rows;
}

std::vector<GammaInterval> gamma_intervals(std::span<const ParameterSet> draws,
                                           const PreparedDataset& data) {
  if (draws.empty()) throw std::invalid_argument("gamma intervals need at least one draw");
  std::vector<std::size_t> races(data.group_count(), 0);
  for (std::size_t g : data.race_group) ++races[g];
  std::vector<GammaInterval> out;
  for (std::size_t g = 0; g < data.group_count(); ++g) {
    std::vector<double> values;
    values.reserve(draws.size());
    for (const ParameterSet& d : draws) values.push_back(d.gamma.at(g));
    out.push_back({data.group_label(g), data.group_year(g), data.group_margin(g), races[g],
                   summarize(values)});
  }
  return out;
}

std::vector<RollingPoint> rolling_undecided(std::span<const PollRecord> polls, Date election_date,
                                            int half_width_days, int span_days) {
  if (half_width_days < 0 || span_days < 0) {
    throw std::invalid_argument("rolling window widths must be nonnegative");
  }
  std::vector<RollingPoint> out;
  for (Date day = election_date - span_days; day <= election_date; day = day + 1) {
    double weighted = 0.0, weight = 0.0;
    std::size_t count = 0;
    for (const PollRecord& p : polls) {
      if (!p.und_share) continue;
      if (p.end_date < day - half_width_days || p.end_date > day + half_width_days) continue;
      const double n = static_cast<double>(p.sample_size);
      weighted += n * *p.und_share;
      weight += n;
      ++count;
    }
    if (count == 0 || weight <= 0.0) continue;
    out.push_back({day, election_date - day, weighted / weight, count});
  }
  return out;
}

std::vector<ScatterRow> group_scatter(const PreparedDataset& data) {
  std::vector<ScatterRow> rows(data.race_count());
  std::vector<double> und_sum(data.race_count(), 0.0);
  std::vector<std::size_t> und_count(data.race_count(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rows[r].race = data.races[r].label();
    rows[r].year = data.races[r].year;
    rows[r].margin = data.races[r].margin_group;
  }
  for (const PreparedPoll& p : data.polls) {
    ScatterRow& row = rows[p.race];
    row.mean_abs_error_pp += std::abs(p.y - data.races[p.race].two_party_outcome);
    ++row.polls;
    if (p.u) {
      und_sum[p.race] += *p.u;
      ++und_count[p.race];
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].polls > 0) rows[r].mean_abs_error_pp *= 100.0 / static_cast<double>(rows[r].polls);
    if (und_count[r] > 0) {
      rows[r].mean_undecided_pp = 100.0 * und_sum[r] / static_cast<double>(und_count[r]);
    }
  }
  return rows;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw std::invalid_argument("histogram bin width must be positive");
  }
  if (values.empty()) return {};
  auto index = [&](double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("histogram of non-finite value");
    return static_cast<long long>(std::floor(v / bin_width));
  };
  long long lo = index(values[0]), hi = lo;
  for (double v : values) {
    lo = std::min(lo, index(v));
    hi = std::max(hi, index(v));
  }
  std::vector<HistogramBin> bins(static_cast<std::size_t>(hi - lo + 1));
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lower = static_cast<double>(lo + static_cast<long long>(b)) * bin_width;
    bins[b].upper = bins[b].lower + bin_width;
  }
  for (double v : values) ++bins[static_cast<std::size_t>(index(v) - lo)].count;
  for (auto& b : bins) b.fraction = static_cast<double>(b.count) / static_cast<double>(values.size());
  return bins;
}

std::vector<RaceSet> year_sets(const PreparedDataset& data) {
  std::vector<bool> has_polls(data.race_count(), false);
  for (const auto& p : data.polls) has_polls[p.race] = true;
  std::vector<RaceSet> sets;
  for (std::size_t y = 0; y < data.year_count(); ++y) {
    RaceSet s{std::to_string(data.years[y]), {}};
    for (std::size_t r = 0; r < data.race_count(); ++r) {
      if (data.race_year[r] == y && has_polls[r]) s.races.push_back(r);
    }
    if (!s.races.empty()) sets.push_back(std::move(s));
  }
  RaceSet all{"All", {}};
  for (std::size_t r = 0; r < data.race_count(); ++r) {
    if (has_polls[r]) all.races.push_back(r);
  }
  if (!all.races.empty()) sets.push_back(std::move(all));
  return sets;
}

namespace {

std::vector<RaceSet> margin_sets(const PreparedDataset& data) {
  std::vector<bool> has_polls(data.race_count(), false);
  for (const auto& p : data.polls) has_polls[p.race] = true;
  std::vector<RaceSet> sets;
  for (MarginGroup m : {MarginGroup::StrongRep, MarginGroup::Close, MarginGroup::StrongDem}) {
    RaceSet s{std::string(to_string(m)), {}};
    for (std::size_t r = 0; r < data.race_count(); ++r) {
      if (data.races[r].margin_group == m && has_polls[r]) s.races.push_back(r);
    }
    if (!s.races.empty()) sets.push_back(std::move(s));
  }
  return sets;
}

// Per-draw, per-race quantities: [quantity][race][draw].
struct PerDraw {
  static constexpr std::size_t kBias = 0, kElectionDay = 1, kUndecided = 2, kHouse = 3,
                               kSd = 4, kAlpha2 = 5, kCount = 6;
  std::vector<std::vector<std::vector<double>>> values;
};

const char* const kQuantityNames[PerDraw::kCount] = {"b_r",   "b_r_e",   "b_r_u",
                                                    "b_r_h", "sigma_r", "alpha2_pct"};

PerDraw per_draw(std::span<const ParameterSet> draws, const PreparedDataset& data) {
  PerDraw pd;
  pd.values.assign(PerDraw::kCount, std::vector<std::vector<double>>(
                                        data.race_count(), std::vector<double>(draws.size())));
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const ParameterSet& draw = draws[d];
    const std::vector<double> parts[] = {
        race_bias(draw, data, BiasKind::All), race_bias(draw, data, BiasKind::ElectionDay),
        race_bias(draw, data, BiasKind::Undecided), race_bias(draw, data, BiasKind::House),
        race_sd(draw, data)};
    for (std::size_t q = 0; q < 5; ++q) {
      for (std::size_t r = 0; r < data.race_count(); ++r) pd.values[q][r][d] = parts[q][r];
    }
    for (std::size_t r = 0; r < data.race_count(); ++r) {
      pd.values[PerDraw::kAlpha2][r][d] = 100.0 * draw.alpha2[r];
    }
  }
  return pd;
}

std::vector<TableCell> build_table(const PerDraw& pd, std::size_t draws,
                                   const std::vector<std::string>& rows,
                                   const std::vector<RaceSet>& sets) {
  const auto& names = table_row_names();
  std::vector<TableCell> cells;
  for (const std::string& row : rows) {
    const auto pos = std::find(names.begin(), names.end(), row) - names.begin();
    const std::size_t q = static_cast<std::size_t>(pos);
    const bool absolute = q < PerDraw::kSd;
    for (const RaceSet& set : sets) {
      std::vector<double> per(draws);
      for (std::size_t d = 0; d < draws; ++d) {
        double total = 0.0;
        for (std::size_t r : set.races) {
          const double v = pd.values[q][r][d];
          total += absolute ? std::abs(v) : v;
        }
        per[d] = total / static_cast<double>(set.races.size());
      }
      cells.push_back({row, set.label, summarize(per)});
    }
  }
  return cells;
}

}  // namespace

SummaryBundle compute(std::span<const ParameterSet> draws, const PreparedDataset& data,
                      ModelVariant variant, std::span<const NationalSeries> national,
                      const SummaryOptions& options) {
  if (draws.empty()) throw std::invalid_argument("summaries need at least one draw");
  SummaryBundle b;
  b.mode = data.mode;
  b.variant = variant;
  b.draws = draws.size();

  const PerDraw pd = per_draw(draws, data);
  for (std::size_t r = 0; r < data.race_count(); ++r) {
    RaceBiasRow row{data.races[r].label(), data.races[r].year, data.races[r].margin_group, {}};
    if (std::isnan(pd.values[0][r][0])) continue;
    for (std::size_t q = 0; q < PerDraw::kCount; ++q) {
      row.quantities[kQuantityNames[q]] = summarize(pd.values[q][r]);
    }
    b.bias_rows.push_back(std::move(row));
  }

  const auto& names = table_row_names();
  if (variant == ModelVariant::Baseline) {
    b.table_rows = {names[0], names[1], names[4]};
  } else {
    b.table_rows = names;
  }
  const auto ysets = year_sets(data);
  for (const auto& s : ysets) b.table_columns.push_back(s.label);
  b.table = build_table(pd, draws.size(), b.table_rows, ysets);
  b.margin_table = build_table(pd, draws.size(), b.table_rows, margin_sets(data));

  b.houses = house_table(draws, data);
  b.gammas = gamma_intervals(draws, data);
  b.scatter = group_scatter(data);

  for (const NationalSeries& series : national) {
    b.rolling[series.year] = rolling_undecided(series.polls, series.election_date,
                                               options.rolling_half_width_days,
                                               options.rolling_span_days);
    std::vector<double> und;
    for (const PollRecord& p : series.polls) {
      if (!p.und_share) continue;
      if (p.end_date < series.election_date - options.rolling_span_days ||
          p.end_date > series.election_date) {
        continue;
      }
      und.push_back(100.0 * *p.und_share);
    }
    b.histograms["national_undecided"][series.year] = histogram(und, options.histogram_bin_pp);
  }

  std::map<int, std::vector<double>> abs_und;
  for (std::size_t r = 0; r < data.race_count(); ++r) {
    const auto& v = pd.values[PerDraw::kUndecided][r];
    if (std::isnan(v[0])) continue;
    double total = 0.0;
    for (double x : v) total += std::abs(x);
    abs_und[data.races[r].year].push_back(total / static_cast<double>(v.size()));
  }
  for (const auto& [year, values] : abs_und) {
    b.histograms["undecided_bias"][year] = histogram(values, options.histogram_bin_pp);
  }
  return b;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"sd", s.sd},     {"q025", s.q025},
          {"q25", s.q25},   {"q75", s.q75},   {"q975", s.q975}};
}

nlohmann::json table_json(const std::vector<TableCell>& cells) {
  nlohmann::json t = nlohmann::json::object();
  for (const TableCell& c : cells) t[c.row][c.column] = summary_json(c.value);
  return t;
}

std::vector<std::string> summary_fields(const Summary& s) {
  return {csv::format_double(s.mean), csv::format_double(s.sd),  csv::format_double(s.q025),
          csv::format_double(s.q25),  csv::format_double(s.q75), csv::format_double(s.q975)};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

nlohmann::json to_json(const SummaryBundle& b) {
  nlohmann::json j;
  j["allocation_mode"] = std::string(to_string(b.mode));
  j["model"] = std::string(to_string(b.variant));
  j["draws"] = b.draws;
  j["units"] = "percentage points; gamma and kappa on the logit scale";
  j["table_rows"] = b.table_rows;
  j["table_columns"] = b.table_columns;
  j["tables"] = table_json(b.table);
  j["tables_by_margin"] = table_json(b.margin_table);
  nlohmann::json houses = nlohmann::json::array();
  for (const HouseRow& h : b.houses) {
    houses.push_back({{"pollster", h.pollster},
                      {"polls", h.polls},
                      {"bias_pp", summary_json(h.bias_pp)},
                      {"kappa", summary_json(h.kappa_logit)}});
  }
  j["house_table"] = houses;
  nlohmann::json gammas = nlohmann::json::array();
  for (const GammaInterval& g : b.gammas) {
    gammas.push_back({{"group", g.label},
                      {"year", g.year},
                      {"margin_group", std::string(to_string(g.margin))},
                      {"races", g.races},
                      {"gamma", summary_json(g.gamma)}});
  }
  j["gamma_intervals"] = gammas;
  nlohmann::json races = nlohmann::json::array();
  for (const RaceBiasRow& r : b.bias_rows) {
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [name, s] : r.quantities) q[name] = summary_json(s);
    races.push_back({{"race", r.race},
                     {"year", r.year},
                     {"margin_group", std::string(to_string(r.margin))},
                     {"quantities", q}});
  }
  j["races"] = races;
  return j;
}

void write_outputs(const std::string& directory, const SummaryBundle& b,
                   const nlohmann::json& extra) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir);
  const std::vector<std::string> stats = {"mean", "sd", "q025", "q25", "q75", "q975"};
  {
    auto out = open_output(dir / "bias_report.csv");
    csv::Row header = {"race", "year", "margin_group", "quantity"};
    header.insert(header.end(), stats.begin(), stats.end());
    csv::write_row(out, header);
    for (const RaceBiasRow& r : b.bias_rows) {
      for (const auto& [name, s] : r.quantities) {
        csv::Row row = {r.race, std::to_string(r.year), std::string(to_string(r.margin)), name};
        auto f = summary_fields(s);
        row.insert(row.end(), f.begin(), f.end());
        csv::write_row(out, row);
      }
    }
  }
  {
    auto out = open_output(dir / "house_table.csv");
    csv::write_row(out, {"pollster", "polls", "bias_mean_pp", "bias_sd_pp", "kappa_mean",
                         "kappa_sd", "kappa_q025", "kappa_q25", "kappa_q75", "kappa_q975"});
    for (const HouseRow& h : b.houses) {
      const auto k = summary_fields(h.kappa_logit);
      csv::write_row(out, {h.pollster, std::to_string(h.polls),
                           csv::format_double(h.bias_pp.mean), csv::format_double(h.bias_pp.sd),
                           k[0], k[1], k[2], k[3], k[4], k[5]});
    }
  }
  {
    auto out = open_output(dir / "gamma_intervals.csv");
    csv::Row header = {"group", "year", "margin_group", "races"};
    header.insert(header.end(), stats.begin(), stats.end());
    csv::write_row(out, header);
    for (const GammaInterval& g : b.gammas) {
      csv::Row row = {g.label, std::to_string(g.year), std::string(to_string(g.margin)),
                      std::to_string(g.races)};
      auto f = summary_fields(g.gamma);
      row.insert(row.end(), f.begin(), f.end());
      csv::write_row(out, row);
    }
  }
  {
    auto out = open_output(dir / "rolling_undecided.csv");
    csv::write_row(out, {"year", "date", "days_before_election", "undecided_pct", "polls"});
    for (const auto& [year, points] : b.rolling) {
      for (const RollingPoint& p : points) {
        csv::write_row(out, {std::to_string(year), p.day.to_string(),
                             std::to_string(p.days_before_election),
                             csv::format_double(100.0 * p.weighted_mean),
                             std::to_string(p.polls)});
      }
    }
  }
  {
    auto out = open_output(dir / "group_scatter.csv");
    csv::write_row(out, {"race", "year", "margin_group", "polls", "mean_abs_error_pp",
                         "mean_undecided_pct"});
    for (const ScatterRow& s : b.scatter) {
      csv::write_row(out, {s.race, std::to_string(s.year), std::string(to_string(s.margin)),
                           std::to_string(s.polls), csv::format_double(s.mean_abs_error_pp),
                           s.mean_undecided_pp ? csv::format_double(*s.mean_undecided_pp) : ""});
    }
  }
  {
    auto out = open_output(dir / "histograms.csv");
    csv::write_row(out, {"figure", "year", "bin_lower_pp", "bin_upper_pp", "count", "fraction"});
    for (const auto& [figure, by_year] : b.histograms) {
      for (const auto& [year, bins] : by_year) {
        for (const HistogramBin& bin : bins) {
          csv::write_row(out, {figure, std::to_string(year), csv::format_double(bin.lower),
                               csv::format_double(bin.upper), std::to_string(bin.count),
                               csv::format_double(bin.fraction)});
        }
      }
    }
  }
  nlohmann::json report = to_json(b);
  for (const auto& [key, value] : extra.items()) report[key] = value;
  auto out = open_output(dir / "report.json");
  out << report.dump(2) << '\n';
}

std::string render_markdown(const nlohmann::json& report) {
  std::ostringstream md;
  md << "# Poll bias report\n\n";
  if (report.contains("converged") && !report["converged"].get<bool>()) {
    md << "> **WARNING: the fit did not converge (R-hat above threshold). "
          "Treat every number below with caution.**\n\n";
  }
  md << "Model: " << report.value("model", "?")
     << ", allocation: " << report.value("allocation_mode", "?")
     << ", draws: " << report.value("draws", 0) << "\n\n";

  const auto& columns = report.at("table_columns");
  md << "## Average election-level bias and standard deviation\n\n";
  md << "Posterior mean with posterior sd in parentheses, percentage points.\n\n|  |";
  for (const auto& c : columns) md << ' ' << c.get<std::string>() << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& row : report.at("table_rows")) {
    const std::string name = row.get<std::string>();
    md << "| " << name << " |";
    for (const auto& c : columns) {
      const auto& cell = report["tables"][name][c.get<std::string>()];
      md << ' ' << pct(cell["mean"].get<double>()) << "% (" << pct(cell["sd"].get<double>())
         << ") |";
    }
    md << '\n';
  }

  if (!report.at("house_table").empty()) {
    md << "\n## House effects\n\n| Pollster | Polls | Mean (pp) | SD (pp) |\n|---|---|---|---|\n";
    std::vector<nlohmann::json> houses(report["house_table"].begin(), report["house_table"].end());
    std::stable_sort(houses.begin(), houses.end(), [](const auto& a, const auto& b) {
      return a["bias_pp"]["mean"].template get<double>() > b["bias_pp"]["mean"].template get<double>();
    });
    for (const auto& h : houses) {
      md << "| " << h["pollster"].get<std::string>() << " | " << h["polls"].get<std::size_t>()
         << " | " << pct(h["bias_pp"]["mean"].get<double>()) << " | "
         << pct(h["bias_pp"]["sd"].get<double>()) << " |\n";
    }
  }

  md << "\n## Undecided allocation effect (gamma, logit scale)\n\n"
        "| Group | Races | Mean | 50% interval | 95% interval |\n|---|---|---|---|---|\n";
  for (const auto& g : report.at("gamma_intervals")) {
    const auto& s = g["gamma"];
    md << "| " << g["group"].get<std::string>() << " | " << g["races"].get<std::size_t>()
       << " | " << pct(s["mean"].get<double>()) << " | [" << pct(s["q25"].get<double>()) << ", "
       << pct(s["q75"].get<double>()) << "] | [" << pct(s["q025"].get<double>()) << ", "
       << pct(s["q975"].get<double>()) << "] |\n";
  }

  md << "\n## Election day bias by race (pp)\n\n| Race | Mean | 95% interval |\n|---|---|---|\n";
  for (const auto& r : report.at("races")) {
    const auto& s = r["quantities"]["b_r_e"];
    md << "| " << r["race"].get<std::string>() << " | " << pct(s["mean"].get<double>()) << " | ["
       << pct(s["q025"].get<double>()) << ", " << pct(s["q975"].get<double>()) << "] |\n";
  }
  return md.str();
}

}  // namespace summaries
}  // namespace pollbias
