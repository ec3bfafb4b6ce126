#include "pollbias/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "pollbias/csv.hpp"

namespace pollbias {

std::string_view to_string(MarginGroup group) {
  switch (group) {
    case MarginGroup::StrongRep: return "StrongRep";
    case MarginGroup::Close: return "Close";
    case MarginGroup::StrongDem: return "StrongDem";
  }
  return "?";
}

MarginGroup parse_margin_group(std::string_view text) {
  if (text == "StrongRep") return MarginGroup::StrongRep;
  if (text == "Close") return MarginGroup::Close;
  if (text == "StrongDem") return MarginGroup::StrongDem;
  throw std::invalid_argument("unknown margin group '" + std::string(text) + "'");
}

MarginGroup classify_margin(double rep_votes, double dem_votes) {
  // Multiply before dividing so round-number margins stay exact.
  const double margin = 100.0 * (rep_votes - dem_votes) / (rep_votes + dem_votes);
  if (std::abs(margin) <= kCloseMarginPoints + 1e-9) return MarginGroup::Close;
  return margin > 0 ? MarginGroup::StrongRep : MarginGroup::StrongDem;
}

std::string RaceResult::label() const { return state + "-" + std::to_string(year); }

RaceResult make_race_result(std::string state, int year, Date election_date, double rep_votes,
                            double dem_votes) {
  if (!(rep_votes >= 0.0) || !(dem_votes >= 0.0) || !std::isfinite(rep_votes) ||
      !std::isfinite(dem_votes))
    throw DataError("vote counts must be finite and nonnegative");
  if (rep_votes <= 0.0 || dem_votes <= 0.0)
    throw DataError("two-party outcome must lie strictly inside (0, 1)");
  RaceResult r;
  r.state = std::move(state);
  r.year = year;
  r.election_date = election_date;
  r.rep_votes = rep_votes;
  r.dem_votes = dem_votes;
  r.two_party_outcome = rep_votes / (rep_votes + dem_votes);
  r.margin_group = classify_margin(rep_votes, dem_votes);
  return r;
}

ShareUnits parse_share_units(std::string_view text) {
  if (text == "percent") return ShareUnits::Percent;
  if (text == "fraction") return ShareUnits::Fraction;
  throw std::invalid_argument("unknown share units '" + std::string(text) +
                              "' (expected percent|fraction)");
}

std::string PreparedDataset::group_label(std::size_t g) const {
  return std::to_string(group_year(g)) + "-" + std::string(to_string(group_margin(g)));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "na" || s == "NaN";
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct RowReject {
  std::string reason;
};

void write_or_throw(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << body;
}

}  // namespace

ParsedPolls parse_polls_text(std::string_view text, const PollSchema& schema) {
  const csv::Table table = csv::parse(text);
  const std::size_t c_id = table.require_column(schema.poll_id);
  const std::size_t c_state = table.require_column(schema.state);
  const std::size_t c_year = table.require_column(schema.year);
  const std::size_t c_date = table.require_column(schema.end_date);
  const std::size_t c_pollster = table.require_column(schema.pollster);
  const std::size_t c_n = table.require_column(schema.sample_size);
  const std::size_t c_rep = table.require_column(schema.rep);
  const std::size_t c_dem = table.require_column(schema.dem);
  const auto c_und = table.column(schema.und);
  const auto c_other = table.column(schema.other);
  const double scale = schema.units == ShareUnits::Percent ? 0.01 : 1.0;

  ParsedPolls out;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const csv::Row& row = table.rows[k];
    const std::size_t line = table.lines[k];
    std::string id = row.size() > c_id ? std::string(trim(row[c_id])) : std::string();
    auto reject = [&](std::string reason) {
      out.rejects.push_back({line, id, std::move(reason)});
    };
    if (row.size() != table.header.size()) {
      reject("expected " + std::to_string(table.header.size()) + " fields, found " +
             std::to_string(row.size()));
      continue;
    }
    if (id.empty()) {
      reject("missing poll_id");
      continue;
    }
    if (seen.count(id)) {
      reject("duplicate poll_id");
      continue;
    }

    PollRecord p;
    p.poll_id = id;
    p.state = std::string(trim(row[c_state]));
    p.pollster = std::string(trim(row[c_pollster]));
    if (p.state.empty()) {
      reject("missing state");
      continue;
    }
    auto year = to_integer(row[c_year]);
    if (!year) {
      reject("unparseable year");
      continue;
    }
    p.year = static_cast<int>(*year);
    try {
      p.end_date = Date::parse(trim(row[c_date]));
    } catch (const std::invalid_argument&) {
      reject("unparseable date");
      continue;
    }
    if (is_missing(row[c_n])) {
      reject("missing sample size");
      continue;
    }
    auto n = to_integer(row[c_n]);
    if (!n) {
      auto nd = to_double(row[c_n]);
      if (nd && *nd == std::floor(*nd)) n = static_cast<long long>(*nd);
    }
    if (!n) {
      reject("unparseable sample size");
      continue;
    }
    if (*n <= 0) {
      reject("nonpositive sample size");
      continue;
    }
    p.sample_size = *n;

    auto read_share = [&](std::size_t col, bool required, std::optional<double>& dst,
                          const char* name) -> bool {
      if (is_missing(row[col])) {
        if (required) {
          reject(std::string("missing ") + name + " share");
          return false;
        }
        dst.reset();
        return true;
      }
      auto v = to_double(row[col]);
      if (!v) {
        reject(std::string("unparseable ") + name + " share");
        return false;
      }
      const double f = *v * scale;
      if (f < 0.0 || f > 1.0 + kShareSumTolerance) {
        reject(std::string(name) + " share outside [0, 100%]");
        return false;
      }
      dst = std::min(f, 1.0);
      return true;
    };
    std::optional<double> rep, dem, und, other;
    if (!read_share(c_rep, true, rep, "rep") || !read_share(c_dem, true, dem, "dem")) continue;
    if (c_und && !read_share(*c_und, false, und, "und")) continue;
    if (c_other && !read_share(*c_other, false, other, "other")) continue;
    p.rep_share = *rep;
    p.dem_share = *dem;
    p.und_share = und;
    p.other_share = other;

    const double total = p.rep_share + p.dem_share + p.und_share.value_or(0.0) +
                         p.other_share.value_or(0.0);
    if (total > 1.0 + kShareSumTolerance) {
      reject("shares sum above 100%");
      continue;
    }
    // A poll that reports a third-party share but sums below 100% is taken
    // to report the remainder as undecided.
    if (!p.und_share && p.other_share && total < 1.0 - kShareSumTolerance)
      p.und_share = 1.0 - total;
    if (p.rep_share + p.dem_share <= 0.0) {
      reject("no two-party support");
      continue;
    }
    seen.insert(id);
    out.polls.push_back(std::move(p));
  }
  return out;
}

ParsedPolls parse_polls(const std::string& path, const PollSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open polls file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_polls_text(buf.str(), schema);
}

ParsedResults parse_results_text(std::string_view text) {
  const csv::Table table = csv::parse(text);
  const std::size_t c_state = table.require_column("state");
  const std::size_t c_year = table.require_column("year");
  const std::size_t c_date = table.require_column("election_date");
  const std::size_t c_rep = table.require_column("rep_votes");
  const std::size_t c_dem = table.require_column("dem_votes");

  ParsedResults out;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const csv::Row& row = table.rows[k];
    const std::size_t line = table.lines[k];
    auto reject = [&](std::string reason) { out.rejects.push_back({line, "", std::move(reason)}); };
    if (row.size() != table.header.size()) {
      reject("wrong field count");
      continue;
    }
    std::string state(trim(row[c_state]));
    auto year = to_integer(row[c_year]);
    if (state.empty() || !year) {
      reject("missing state or year");
      continue;
    }
    Date date;
    try {
      date = Date::parse(trim(row[c_date]));
    } catch (const std::invalid_argument&) {
      reject("unparseable date");
      continue;
    }
    auto rep = to_double(row[c_rep]);
    auto dem = to_double(row[c_dem]);
    if (!rep || !dem) {
      reject("unparseable vote count");
      continue;
    }
    if (!seen.emplace(state, static_cast<int>(*year)).second) {
      reject("duplicate race");
      continue;
    }
    try {
      out.results.push_back(make_race_result(state, static_cast<int>(*year), date, *rep, *dem));
    } catch (const DataError& e) {
      reject(e.what());
    }
  }
  return out;
}

ParsedResults parse_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open results file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_results_text(buf.str());
}

Preparation prepare_dataset(const std::vector<PollRecord>& polls,
                            const std::vector<RaceResult>& results,
                            const PrepareOptions& options) {
  if (options.window_days <= 0) throw DataError("window_days must be positive");
  if (options.min_polls_per_race < 1) throw DataError("min_polls_per_race must be at least 1");

  Preparation prep;
  std::map<std::pair<std::string, int>, std::size_t> race_lookup;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!race_lookup.emplace(std::make_pair(results[i].state, results[i].year), i).second)
      throw DataError("duplicate race result " + results[i].label());
  }

  struct Candidate {
    const PollRecord* poll;
    std::size_t result;
    int days;
  };
  std::vector<Candidate> kept;
  for (const PollRecord& p : polls) {
    auto it = race_lookup.find({p.state, p.year});
    if (it == race_lookup.end()) {
      prep.rejects.push_back({0, p.poll_id, "no matching race result"});
      continue;
    }
    const int days = results[it->second].election_date - p.end_date;
    if (days < 0) {
      prep.exclusions.push_back({p.poll_id, "ends after election day"});
      continue;
    }
    if (days > options.window_days) {
      prep.exclusions.push_back(
          {p.poll_id, "outside " + std::to_string(options.window_days) + "-day window"});
      continue;
    }
    kept.push_back({&p, it->second, days});
  }

  if (options.mode == AllocationMode::Even) {
    std::vector<Candidate> with_und;
    for (const Candidate& c : kept) {
      if (c.poll->und_share)
        with_und.push_back(c);
      else
        prep.exclusions.push_back({c.poll->poll_id, "no undecided share (even allocation)"});
    }
    kept = std::move(with_und);
  }

  std::map<std::size_t, std::size_t> per_race;
  for (const Candidate& c : kept) ++per_race[c.result];
  std::vector<Candidate> surviving;
  for (const Candidate& c : kept) {
    if (per_race[c.result] >= options.min_polls_per_race)
      surviving.push_back(c);
    else
      prep.exclusions.push_back({c.poll->poll_id, "race has fewer than " +
                                                      std::to_string(options.min_polls_per_race) +
                                                      " polls"});
  }
  if (surviving.empty()) throw DataError("no polls survive the inclusion rules");

  PreparedDataset& data = prep.dataset;
  data.mode = options.mode;
  data.window_days = options.window_days;

  std::set<std::size_t> used_results;
  for (const Candidate& c : surviving) used_results.insert(c.result);
  std::vector<std::size_t> order(used_results.begin(), used_results.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(results[a].state, results[a].year) < std::tie(results[b].state, results[b].year);
  });
  std::map<std::size_t, std::size_t> race_index;
  std::set<int> years;
  for (std::size_t r = 0; r < order.size(); ++r) {
    race_index[order[r]] = r;
    data.races.push_back(results[order[r]]);
    years.insert(results[order[r]].year);
  }
  data.years.assign(years.begin(), years.end());
  for (const RaceResult& race : data.races) {
    const auto y = static_cast<std::size_t>(
        std::lower_bound(data.years.begin(), data.years.end(), race.year) - data.years.begin());
    data.race_year.push_back(y);
    data.race_group.push_back(y * kMarginGroupCount + static_cast<std::size_t>(race.margin_group));
  }

  std::map<std::string, std::size_t> per_pollster;
  for (const Candidate& c : surviving) ++per_pollster[c.poll->pollster];
  std::map<std::string, std::size_t> house_index;
  for (const auto& [name, count] : per_pollster) {
    if (count >= options.min_polls_per_house && !name.empty()) {
      house_index[name] = data.houses.size();
      data.houses.push_back(name);
    }
  }

  for (const Candidate& c : surviving) {
    const PollRecord& p = *c.poll;
    PreparedPoll pp;
    pp.source = p;
    pp.race = race_index.at(c.result);
    pp.days_to_election = c.days;
    pp.t = static_cast<double>(c.days) / static_cast<double>(options.window_days);
    const double und = p.und_share.value_or(0.0);
    pp.y = allocation::two_party_share(options.mode, p.rep_share, p.dem_share, und);
    if (p.und_share) pp.u = allocation::scaled_undecided(p.rep_share, p.dem_share, und);
    if (auto it = house_index.find(p.pollster); it != house_index.end()) pp.house = it->second;
    data.polls.push_back(std::move(pp));
  }
  std::sort(data.polls.begin(), data.polls.end(), [](const PreparedPoll& a, const PreparedPoll& b) {
    return std::tie(a.race, a.source.end_date, a.source.poll_id) <
           std::tie(b.race, b.source.end_date, b.source.poll_id);
  });
  return prep;
}

void write_polls_csv(const std::string& path, const std::vector<PollRecord>& polls,
                     ShareUnits units) {
  std::ostringstream out;
  csv::write_row(out, {"poll_id", "state", "year", "end_date", "pollster", "sample_size", "rep",
                       "dem", "und", "other"});
  const double scale = units == ShareUnits::Percent ? 100.0 : 1.0;
  auto share = [&](std::optional<double> v) {
    return v ? csv::format_double(*v * scale) : std::string();
  };
  for (const PollRecord& p : polls) {
    csv::write_row(out, {p.poll_id, p.state, std::to_string(p.year), p.end_date.to_string(),
                         p.pollster, std::to_string(p.sample_size), share(p.rep_share),
                         share(p.dem_share), share(p.und_share), share(p.other_share)});
  }
  write_or_throw(path, out.str());
}

void write_results_csv(const std::string& path, const std::vector<RaceResult>& results) {
  std::ostringstream out;
  csv::write_row(out, {"state", "year", "election_date", "rep_votes", "dem_votes"});
  for (const RaceResult& r : results) {
    csv::write_row(out, {r.state, std::to_string(r.year), r.election_date.to_string(),
                         csv::format_double(r.rep_votes), csv::format_double(r.dem_votes)});
  }
  write_or_throw(path, out.str());
}

void write_rejects_csv(const std::string& path, const std::vector<Reject>& rejects) {
  std::ostringstream out;
  csv::write_row(out, {"line", "poll_id", "reason"});
  for (const Reject& r : rejects)
    csv::write_row(out, {r.line ? std::to_string(r.line) : std::string(), r.poll_id, r.reason});
  write_or_throw(path, out.str());
}

void write_exclusions_csv(const std::string& path, const std::vector<Exclusion>& exclusions) {
  std::ostringstream out;
  csv::write_row(out, {"poll_id", "reason"});
  for (const Exclusion& e : exclusions) csv::write_row(out, {e.poll_id, e.reason});
  write_or_throw(path, out.str());
}

void write_prepared_csv(const std::string& path, const PreparedDataset& data) {
  std::ostringstream out;
  csv::write_row(out, {"poll_id", "race", "year", "group", "house", "pollster", "sample_size",
                       "days_to_election", "t", "y", "u", "v"});
  for (const PreparedPoll& p : data.polls) {
    const RaceResult& race = data.races[p.race];
    csv::write_row(out, {p.source.poll_id, race.label(), std::to_string(race.year),
                         data.group_label(data.race_group[p.race]),
                         p.house ? data.houses[*p.house] : std::string(), p.source.pollster,
                         std::to_string(p.source.sample_size), std::to_string(p.days_to_election),
                         csv::format_double(p.t), csv::format_double(p.y),
                         p.u ? csv::format_double(*p.u) : std::string(),
                         csv::format_double(race.two_party_outcome)});
  }
  write_or_throw(path, out.str());
}

}  // namespace pollbias
