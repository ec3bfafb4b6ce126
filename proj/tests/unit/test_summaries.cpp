#include <doctest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "pollbias/summaries.hpp"
#include "support.hpp"

using namespace pollbias;
using namespace pollbias::summaries;

namespace {

// One race with one poll; everything at zero.
testing::Fixture single_poll(double v, std::int64_t n) {
  testing::Fixture f;
  const double rep = v * 1000.0;
  f.data.races = {make_race_result("AA", 2016, Date::from_ymd(2016, 11, 8), rep, 1000.0 - rep)};
  f.data.years = {2016};
  f.data.race_year = {0};
  f.data.race_group = {static_cast<std::size_t>(f.data.races[0].margin_group)};
  f.data.houses = {"H"};
  PreparedPoll p;
  p.source.sample_size = n;
  p.race = 0;
  p.house = 0;
  p.y = v;
  f.data.polls = {p};
  f.params.alpha1 = f.params.beta1 = f.params.tau1_sq = {0.0};
  f.params.alpha2 = f.params.beta2 = f.params.tau2_sq = {0.0};
  f.params.gamma = {0.0, 0.0, 0.0};
  f.params.kappa = {0.0};
  f.params.phi = {0.04};
  return f;
}

}  // namespace

TEST_SUITE("summaries") {
  TEST_CASE("all-zero parameters give zero bias") {
    auto f = testing::bias_fixture();
    f.params.alpha1 = f.params.beta1 = {0.0, 0.0};
    f.params.gamma = {0.0, 0.0, 0.0};
    f.params.kappa = {0.0};
    for (auto kind : {BiasKind::All, BiasKind::ElectionDay, BiasKind::Undecided, BiasKind::House}) {
      for (double b : race_bias(f.params, f.data, kind)) CHECK(std::abs(b) < 1e-14);
    }
  }

  TEST_CASE("house bias of a single poll") {
    auto f = single_poll(0.5, 1000);
    f.params.kappa = {0.0951};
    const auto b = race_bias(f.params, f.data, BiasKind::House);
    CHECK(b[0] == doctest::Approx(100.0 * (1.0 / (1.0 + std::exp(-0.0951)) - 0.5)).epsilon(1e-13));
    CHECK(b[0] == doctest::Approx(2.376).epsilon(1e-3));
  }

  TEST_CASE("poll standard deviation") {
    auto f = single_poll(0.5, 625);
    const std::vector<std::size_t> all = {0};
    CHECK(average_sd(f.params, f.data, all) == doctest::Approx(2.0).epsilon(1e-13));
    f.params.tau1_sq = {0.0004};
    CHECK(average_sd(f.params, f.data, all) == doctest::Approx(100 * std::sqrt(0.0008)).epsilon(1e-13));
  }

  TEST_CASE("average absolute bias") {
    const std::vector<double> b = {1.0, -1.0, 0.0};
    CHECK(average_abs_bias(b, std::vector<std::size_t>{0, 1}) == 1.0);
    CHECK(average_abs_bias(b, std::vector<std::size_t>{2}) == 0.0);
    CHECK_THROWS(average_abs_bias(b, std::vector<std::size_t>{}));
  }

  TEST_CASE("all and election-day bias differ only through the time trend") {
    const auto g = synthetic::generate(testing::small_scenario(8, 7, 12));
    auto p = g.truth;
    p.beta1.assign(p.beta1.size(), 0.0);
    const auto all = race_bias(p, g.preparation.dataset, BiasKind::All);
    const auto eday = race_bias(p, g.preparation.dataset, BiasKind::ElectionDay);
    for (std::size_t r = 0; r < all.size(); ++r) CHECK(all[r] == doctest::Approx(eday[r]).epsilon(1e-14));
  }

  TEST_CASE("golden per-race quantities") {
    const auto f = testing::bias_fixture();
    std::ifstream in(std::string(POLLBIAS_TEST_DATA_DIR) + "/bias_golden.json");
    const auto golden = nlohmann::json::parse(in);
    const auto b = race_bias(f.params, f.data, BiasKind::Undecided);
    CHECK(std::abs(b[0] - golden["races"]["0"]["undecided"].get<double>()) < 1e-10);
    CHECK(std::abs(b[1] - golden["races"]["1"]["undecided"].get<double>()) < 1e-10);
    const auto sd = race_sd(f.params, f.data);
    CHECK(std::abs(sd[0] - golden["races"]["0"]["sigma"].get<double>()) < 1e-10);
  }

  TEST_CASE("house table with zero house effects") {
    const auto f = testing::bias_fixture();
    auto p = f.params;
    p.kappa = {0.0};
    const std::vector<ParameterSet> draws = {p, p};
    const auto rows = house_table(draws, f.data);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].polls == 2);
    CHECK(rows[0].bias_pp.mean == 0.0);
    CHECK(rows[0].bias_pp.sd == 0.0);
  }

  TEST_CASE("degenerate gamma draws give a point interval") {
    const auto f = testing::bias_fixture();
    const std::vector<ParameterSet> draws(5, f.params);
    const auto g = gamma_intervals(draws, f.data);
    REQUIRE(g.size() == 3);
    CHECK(g[1].label == "2016-Close");
    CHECK(g[1].races == 1);
    CHECK(g[1].gamma.q025 == 1.1);
    CHECK(g[1].gamma.q975 == 1.1);
    CHECK(g[1].gamma.mean == doctest::Approx(1.1));
  }

  TEST_CASE("quantiles interpolate linearly") {
    const std::vector<double> v = {4, 1, 3, 2, 5};
    CHECK(quantile(v, 0.25) == 2.0);
    CHECK(quantile(v, 0.1) == doctest::Approx(1.4));
    const Summary s = summarize(v);
    CHECK(s.mean == 3.0);
    CHECK(s.sd == doctest::Approx(std::sqrt(2.5)));
    CHECK(s.q975 == doctest::Approx(4.9));
    CHECK_THROWS(summarize(std::vector<double>{}));
  }

  TEST_CASE("rolling average") {
    const Date e = Date::from_ymd(2016, 11, 8);
    PollRecord a, b;
    a.end_date = e - 10;
    a.sample_size = 500;
    a.und_share = 0.04;
    b.end_date = e - 12;
    b.sample_size = 1500;
    b.und_share = 0.08;
    const std::vector<PollRecord> one = {a};
    const auto single = rolling_undecided(one, e);
    REQUIRE_FALSE(single.empty());
    for (const auto& pt : single) CHECK(pt.weighted_mean == 0.04);
    // Days from e-17 to e-3 see the poll.
    CHECK(single.size() == 15);
    CHECK(single.front().days_before_election == 17);
    const std::vector<PollRecord> both = {a, b};
    bool seen = false;
    for (const auto& pt : rolling_undecided(both, e)) {
      if (pt.day == e - 11) {
        CHECK(pt.weighted_mean == doctest::Approx(0.07).epsilon(1e-15));
        seen = true;
      }
    }
    CHECK(seen);
    // Polls far outside the 90-day span produce nothing.
    a.end_date = e - 200;
    CHECK(rolling_undecided(std::vector<PollRecord>{a}, e).empty());
  }

  TEST_CASE("group scatter") {
    auto f = testing::bias_fixture();
    f.data.polls[0].y = 0.57;
    f.data.polls[1].y = 0.53;
    f.data.polls[0].u = 0.04;
    f.data.polls[1].u = 0.06;
    f.data.polls[2].u.reset();
    const auto rows = group_scatter(f.data);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mean_abs_error_pp == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*rows[0].mean_undecided_pp == doctest::Approx(5.0).epsilon(1e-12));
    CHECK_FALSE(rows[1].mean_undecided_pp.has_value());
    CHECK(rows[1].margin == MarginGroup::Close);
  }

  TEST_CASE("histograms partition their input") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(2.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> v(1 + trial * 7);
      for (auto& x : v) x = z(rng);
      const auto bins = histogram(v, 0.5);
      std::size_t total = 0;
      double frac = 0.0;
      for (std::size_t i = 0; i < bins.size(); ++i) {
        total += bins[i].count;
        frac += bins[i].fraction;
        if (i > 0) CHECK(bins[i].lower == doctest::Approx(bins[i - 1].upper));
      }
      CHECK(total == v.size());
      CHECK(frac == doctest::Approx(1.0));
    }
    const auto edge = histogram(std::vector<double>{0.0, 0.5, 0.49}, 0.5);
    REQUIRE(edge.size() == 2);
    CHECK(edge[0].count == 2);
    CHECK(edge[1].count == 1);
    CHECK_THROWS(histogram(std::vector<double>{1.0}, 0.0));
  }

  TEST_CASE("bundle is deterministic and keyed by the table row names") {
    const auto g = synthetic::generate(testing::small_scenario(8, 7, 12));
    std::vector<ParameterSet> draws;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 0.02);
    for (int i = 0; i < 20; ++i) {
      auto p = g.truth;
      for (auto& a : p.alpha1) a += z(rng);
      draws.push_back(p);
    }
    NationalSeries nat{2016, Date::from_ymd(2016, 11, 8), {}};
    for (int i = 0; i < 30; ++i) {
      PollRecord p;
      p.end_date = nat.election_date - 3 * i;
      p.sample_size = 1000 + 10 * i;
      p.und_share = 0.03 + 0.001 * i;
      nat.polls.push_back(p);
    }
    const std::vector<NationalSeries> national = {nat};
    const auto a = to_json(compute(draws, g.preparation.dataset, ModelVariant::Extended, national));
    const auto b = to_json(compute(draws, g.preparation.dataset, ModelVariant::Extended, national));
    CHECK(a.dump() == b.dump());
    for (const auto& row : table_row_names()) {
      CHECK(a["tables"].contains(row));
      CHECK(a["tables"][row].contains("All"));
    }
    const auto base = compute(draws, g.preparation.dataset, ModelVariant::Baseline);
    CHECK(base.table_rows.size() == 3);
    const auto bundle = compute(draws, g.preparation.dataset, ModelVariant::Extended, national);
    CHECK(bundle.histograms.at("national_undecided").at(2016).size() > 0);
    CHECK(bundle.rolling.at(2016).size() > 0);
    const auto md = render_markdown(a);
    CHECK(md.find("Average absolute undecided voter bias") != std::string::npos);
    auto unconverged = a;
    unconverged["converged"] = false;
    CHECK(render_markdown(unconverged).find("WARNING") != std::string::npos);
  }
}
