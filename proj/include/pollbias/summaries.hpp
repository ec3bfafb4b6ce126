#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pollbias/data_ingest.hpp"
#include "pollbias/parameters.hpp"

namespace pollbias {

/// Which predictor components define a bias quantity.
///   All:         alpha1 + t beta1 - 10 alpha2 gamma + kappa
///   ElectionDay: alpha1 - 10 alpha2 gamma + kappa
///   Undecided:   -10 alpha2 gamma
///   House:       kappa (zero for unhoused polls)
enum class BiasKind { All, ElectionDay, Undecided, House };
std::string_view to_string(BiasKind kind);

/// Posterior summary of a scalar: mean, sd and central 50% / 95% intervals.
struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0, q25 = 0.0, q75 = 0.0, q975 = 0.0;
};

/// Empirical summary (type-7 quantiles). Throws on empty input.
Summary summarize(std::span<const double> values);
double quantile(std::vector<double> values, double prob);

namespace summaries {

/// Expected poll share p_i under the kind-specific predictor.
double poll_predictor(const ParameterSet& draw, const PreparedDataset& data, std::size_t i,
                      BiasKind kind);

/// b_r for every race, in percentage points.
std::vector<double> race_bias(const ParameterSet& draw, const PreparedDataset& data, BiasKind kind);

/// Mean of |b_s| over the races in `subset`, in the units of `per_race`.
double average_abs_bias(std::span<const double> per_race, std::span<const std::size_t> subset);

/// sigma_r for every race in percentage points (All predictor).
std::vector<double> race_sd(const ParameterSet& draw, const PreparedDataset& data);

/// Mean of sigma_r over `subset`, in percentage points.
double average_sd(const ParameterSet& draw, const PreparedDataset& data,
                  std::span<const std::size_t> subset);

struct HouseRow {
  std::string pollster;
  std::size_t polls = 0;
  Summary bias_pp;       // b_h
  Summary kappa_logit;   // kappa_h
};

std::vector<HouseRow> house_table(std::span<const ParameterSet> draws, const PreparedDataset& data);

struct GammaInterval {
  std::string label;
  int year = 0;
  MarginGroup margin = MarginGroup::Close;
  std::size_t races = 0;
  Summary gamma;
};

std::vector<GammaInterval> gamma_intervals(std::span<const ParameterSet> draws,
                                           const PreparedDataset& data);

struct RollingPoint {
  Date day;
  int days_before_election = 0;
  double weighted_mean = 0.0;  // fraction
  std::size_t polls = 0;
};

/// Sample-size weighted mean undecided share over polls ending within
/// [x - half_width, x + half_width] for each day x in
/// [election - span_days, election]. Days without polls are skipped.
std::vector<RollingPoint> rolling_undecided(std::span<const PollRecord> polls, Date election_date,
                                            int half_width_days = 7, int span_days = 90);

struct ScatterRow {
  std::string race;
  int year = 0;
  MarginGroup margin = MarginGroup::Close;
  std::size_t polls = 0;
  double mean_abs_error_pp = 0.0;
  std::optional<double> mean_undecided_pp;
};

/// Raw per-race mean |y_i - v_r| and mean reported undecided level.
std::vector<ScatterRow> group_scatter(const PreparedDataset& data);

struct HistogramBin {
  double lower = 0.0, upper = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
};

/// Fixed-width bins anchored at 0 covering every value; counts sum to
/// values.size().
std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width);

/// Race subsets used in the year-column tables: one per year plus all years.
struct RaceSet {
  std::string label;
  std::vector<std::size_t> races;
};
std::vector<RaceSet> year_sets(const PreparedDataset& data);

struct RaceBiasRow {
  std::string race;
  int year = 0;
  MarginGroup margin = MarginGroup::Close;
  std::map<std::string, Summary> quantities;  // b_r, b_r_e, b_r_u, b_r_h, sigma_r
};

struct TableCell {
  std::string row;
  std::string column;
  Summary value;
};

struct NationalSeries {
  int year = 0;
  Date election_date;
  std::vector<PollRecord> polls;
};

struct SummaryBundle {
  AllocationMode mode = AllocationMode::Proportional;
  ModelVariant variant = ModelVariant::Extended;
  std::vector<RaceBiasRow> bias_rows;
  std::vector<std::string> table_rows;
  std::vector<std::string> table_columns;
  std::vector<TableCell> table;
  std::vector<TableCell> margin_table;  // columns are margin groups
  std::vector<HouseRow> houses;
  std::vector<GammaInterval> gammas;
  std::vector<ScatterRow> scatter;
  std::map<int, std::vector<RollingPoint>> rolling;
  // figure -> year -> bins
  std::map<std::string, std::map<int, std::vector<HistogramBin>>> histograms;
  std::size_t draws = 0;
};

struct SummaryOptions {
  double histogram_bin_pp = 0.5;
  int rolling_half_width_days = 7;
  int rolling_span_days = 90;
};

/// Row names of the year-column tables.
inline const std::vector<std::string>& table_row_names() {
  static const std::vector<std::string> rows = {
      "Average absolute bias",
      "Average absolute election day bias",
      "Average absolute undecided voter bias",
      "Average absolute house effects",
      "Average standard deviation",
      "Average election day undecided"};
  return rows;
}

/// Every per-draw quantity is computed draw by draw and then summarized.
SummaryBundle compute(std::span<const ParameterSet> draws, const PreparedDataset& data,
                      ModelVariant variant, std::span<const NationalSeries> national = {},
                      const SummaryOptions& options = {});

/// Writes bias_report.csv, house_table.csv, gamma_intervals.csv,
/// rolling_undecided.csv, group_scatter.csv, histograms.csv, report.json.
void write_outputs(const std::string& directory, const SummaryBundle& bundle,
                   const nlohmann::json& extra = nlohmann::json::object());

nlohmann::json to_json(const SummaryBundle& bundle);

/// Markdown report laid out like the published tables, from report.json.
std::string render_markdown(const nlohmann::json& report);

}  // namespace summaries
}  // namespace pollbias
