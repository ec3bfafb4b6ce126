#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pollbias/allocation.hpp"
#include "pollbias/date.hpp"

namespace pollbias {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One published poll. Shares are fractions in [0, 1].
struct PollRecord {
  std::string poll_id;
  std::string state;
  int year = 0;
  Date end_date;
  std::string pollster;
  std::int64_t sample_size = 0;
  double rep_share = 0.0;
  double dem_share = 0.0;
  std::optional<double> und_share;
  std::optional<double> other_share;
};

enum class MarginGroup { StrongRep = 0, Close = 1, StrongDem = 2 };
inline constexpr std::size_t kMarginGroupCount = 3;

std::string_view to_string(MarginGroup group);
MarginGroup parse_margin_group(std::string_view text);

/// Races within this many two-party percentage points are Close (inclusive).
inline constexpr double kCloseMarginPoints = 6.0;

MarginGroup classify_margin(double rep_votes, double dem_votes);

struct RaceResult {
  std::string state;
  int year = 0;
  Date election_date;
  double rep_votes = 0.0;
  double dem_votes = 0.0;
  double two_party_outcome = 0.0;
  MarginGroup margin_group = MarginGroup::Close;

  std::string label() const;
};

/// Builds a RaceResult, validating the vote counts.
RaceResult make_race_result(std::string state, int year, Date election_date, double rep_votes,
                            double dem_votes);

enum class ShareUnits { Percent, Fraction };
ShareUnits parse_share_units(std::string_view text);

/// Column names for the polls CSV. Units are declared, never sniffed.
struct PollSchema {
  std::string poll_id = "poll_id";
  std::string state = "state";
  std::string year = "year";
  std::string end_date = "end_date";
  std::string pollster = "pollster";
  std::string sample_size = "sample_size";
  std::string rep = "rep";
  std::string dem = "dem";
  std::string und = "und";
  std::string other = "other";
  ShareUnits units = ShareUnits::Percent;
};

struct Reject {
  std::size_t line = 0;  // 0 when not tied to an input line
  std::string poll_id;
  std::string reason;
};

struct ParsedPolls {
  std::vector<PollRecord> polls;
  std::vector<Reject> rejects;
};

struct ParsedResults {
  std::vector<RaceResult> results;
  std::vector<Reject> rejects;
};

inline constexpr double kShareSumTolerance = 1e-9;

ParsedPolls parse_polls_text(std::string_view text, const PollSchema& schema = {});
ParsedPolls parse_polls(const std::string& path, const PollSchema& schema = {});
ParsedResults parse_results_text(std::string_view text);
ParsedResults parse_results(const std::string& path);

struct PrepareOptions {
  AllocationMode mode = AllocationMode::Proportional;
  int window_days = 35;
  std::size_t min_polls_per_race = 5;
  std::size_t min_polls_per_house = 8;
};

struct PreparedPoll {
  PollRecord source;
  double y = 0.0;             // Republican two-party share under the active mode
  std::optional<double> u;    // U / (R + D + U) when undecided is reported
  double t = 0.0;             // days to election / window, in [0, 1]
  int days_to_election = 0;
  std::size_t race = 0;
  std::optional<std::size_t> house;
};

/// Filtered, indexed polls ready for the model. Races are sorted by
/// (state, year), houses by pollster name, groups by (year, margin).
struct PreparedDataset {
  std::vector<PreparedPoll> polls;
  std::vector<RaceResult> races;
  std::vector<int> years;
  std::vector<std::size_t> race_year;   // index into years
  std::vector<std::size_t> race_group;  // index into groups
  std::vector<std::string> houses;
  AllocationMode mode = AllocationMode::Proportional;
  int window_days = 35;

  std::size_t race_count() const { return races.size(); }
  std::size_t group_count() const { return years.size() * kMarginGroupCount; }
  std::size_t house_count() const { return houses.size(); }
  std::size_t year_count() const { return years.size(); }

  std::size_t group_of_poll(std::size_t i) const { return race_group[polls[i].race]; }
  int group_year(std::size_t g) const { return years[g / kMarginGroupCount]; }
  MarginGroup group_margin(std::size_t g) const {
    return static_cast<MarginGroup>(g % kMarginGroupCount);
  }
  std::string group_label(std::size_t g) const;
};

struct Exclusion {
  std::string poll_id;
  std::string reason;
};

struct Preparation {
  PreparedDataset dataset;
  std::vector<Reject> rejects;        // polls with no matching race
  std::vector<Exclusion> exclusions;  // valid polls removed by the inclusion rules
};

/// Applies, in order: election window, (even mode) drop polls without an
/// undecided share, per-race minimum count, house assignment.
Preparation prepare_dataset(const std::vector<PollRecord>& polls,
                            const std::vector<RaceResult>& results,
                            const PrepareOptions& options = {});

// Polls CSV in the ingest schema (fraction units when `units` says so).
void write_polls_csv(const std::string& path, const std::vector<PollRecord>& polls,
                     ShareUnits units = ShareUnits::Fraction);
void write_results_csv(const std::string& path, const std::vector<RaceResult>& results);
void write_rejects_csv(const std::string& path, const std::vector<Reject>& rejects);
void write_exclusions_csv(const std::string& path, const std::vector<Exclusion>& exclusions);
/// Derived per-poll quantities (y, u, t and indices).
void write_prepared_csv(const std::string& path, const PreparedDataset& data);

}  // namespace pollbias
