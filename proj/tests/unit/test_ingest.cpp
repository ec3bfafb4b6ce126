#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "pollbias/csv.hpp"
#include "pollbias/data_ingest.hpp"
#include "support.hpp"

using namespace pollbias;

namespace {

const char* const kHeader = "poll_id,state,year,end_date,pollster,sample_size,rep,dem,und,other\n";

std::string polls_for_race(const std::string& state, int count, int first_day_before,
                           const std::string& pollster = "P") {
  std::ostringstream s;
  const Date election = Date::from_ymd(2016, 11, 8);
  for (int i = 0; i < count; ++i) {
    s << state << i << "," << state << ",2016," << (election - (first_day_before + i)).to_string()
      << "," << pollster << ",800,48,42,6,\n";
  }
  return s.str();
}

std::vector<RaceResult> two_results() {
  return {make_race_result("AZ", 2016, Date::from_ymd(2016, 11, 8), 1252401, 1161167),
          make_race_result("OH", 2016, Date::from_ymd(2016, 11, 8), 2841005, 2394164)};
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("percent shares are converted to fractions") {
    const auto parsed = parse_polls_text(std::string(kHeader) + "a,AZ,2016,2016-11-01,P,800,48,42,6,\n");
    REQUIRE(parsed.polls.size() == 1);
    CHECK(parsed.polls[0].rep_share == doctest::Approx(0.48));
    CHECK(parsed.polls[0].und_share.value() == doctest::Approx(0.06));
    CHECK_FALSE(parsed.polls[0].other_share.has_value());
  }

  TEST_CASE("fraction units are read as given") {
    PollSchema schema;
    schema.units = ShareUnits::Fraction;
    const auto parsed =
        parse_polls_text(std::string(kHeader) + "a,AZ,2016,2016-11-01,P,800,0.48,0.42,0.06,\n", schema);
    REQUIRE(parsed.polls.size() == 1);
    CHECK(parsed.polls[0].dem_share == 0.42);
  }

  TEST_CASE("remainder becomes undecided when a third party is reported") {
    const auto parsed = parse_polls_text(std::string(kHeader) + "a,AZ,2016,2016-11-01,P,800,48,42,,4\n");
    REQUIRE(parsed.polls.size() == 1);
    CHECK(parsed.polls[0].und_share.value() == doctest::Approx(0.06));
  }

  TEST_CASE("no remainder rule without a third-party share or at exactly 100%") {
    const auto parsed = parse_polls_text(std::string(kHeader) +
                                         "a,AZ,2016,2016-11-01,P,800,48,42,,\n"
                                         "b,AZ,2016,2016-11-01,P,800,50,46,,4\n");
    REQUIRE(parsed.polls.size() == 2);
    CHECK_FALSE(parsed.polls[0].und_share.has_value());
    CHECK_FALSE(parsed.polls[1].und_share.has_value());
  }

  TEST_CASE("invalid rows are rejected with reasons, never dropped silently") {
    const std::string text = std::string(kHeader) +
                             "a,AZ,2016,2016-11-01,P,0,48,42,6,\n"
                             "b,AZ,2016,2016-11-01,P,,48,42,6,\n"
                             "c,AZ,2016,2016-13-01,P,800,48,42,6,\n"
                             "d,AZ,2016,2016-11-01,P,800,60,42,6,\n"
                             "e,AZ,2016,2016-11-01,P,800,48,42,6,\n"
                             "e,AZ,2016,2016-11-01,P,800,48,42,6,\n"
                             "f,AZ,2016,2016-11-01,P,800,0,0,6,\n"
                             "g,AZ,2016,2016-11-01,P,-5,48,42,6,\n"
                             "h,AZ,2016\n";
    const auto parsed = parse_polls_text(text);
    CHECK(parsed.polls.size() == 1);
    REQUIRE(parsed.rejects.size() == 8);
    CHECK(parsed.rejects[0].reason == "nonpositive sample size");
    CHECK(parsed.rejects[0].line == 2);
    CHECK(parsed.rejects[1].reason == "missing sample size");
    CHECK(parsed.rejects[2].reason == "unparseable date");
    CHECK(parsed.rejects[3].reason == "shares sum above 100%");
    CHECK(parsed.rejects[4].reason == "duplicate poll_id");
    CHECK(parsed.rejects[5].reason == "no two-party support");
    CHECK(parsed.rejects[6].reason == "nonpositive sample size");
    CHECK(parsed.rejects[7].reason.find("fields") != std::string::npos);
  }

  TEST_CASE("margin groups, boundary inclusive") {
    CHECK(classify_margin(53, 47) == MarginGroup::Close);
    CHECK(classify_margin(52.95, 47.05) == MarginGroup::Close);
    CHECK(classify_margin(53.5, 46.5) == MarginGroup::StrongRep);
    CHECK(classify_margin(46.5, 53.5) == MarginGroup::StrongDem);
    CHECK(make_race_result("X", 2016, Date::from_ymd(2016, 11, 8), 530, 470).margin_group ==
          MarginGroup::Close);
    CHECK_THROWS_AS(make_race_result("X", 2016, Date::from_ymd(2016, 11, 8), 0, 0), DataError);
  }

  TEST_CASE("window and race-count filters") {
    // AZ: 5 polls 3..7 days out plus one 40 days out; OH: 4 polls.
    std::string text = std::string(kHeader) + polls_for_race("AZ", 5, 3) + polls_for_race("OH", 4, 1);
    text += "late,AZ,2016," + (Date::from_ymd(2016, 11, 8) - 40).to_string() + ",P,800,48,42,6,\n";
    text += "orphan,TX,2016,2016-11-01,P,800,48,42,6,\n";
    const auto parsed = parse_polls_text(text);
    const auto prep = prepare_dataset(parsed.polls, two_results());
    const auto& d = prep.dataset;
    REQUIRE(d.race_count() == 1);
    CHECK(d.races[0].state == "AZ");
    CHECK(d.polls.size() == 5);
    REQUIRE(prep.rejects.size() == 1);
    CHECK(prep.rejects[0].reason == "no matching race result");
    std::size_t window = 0, count = 0;
    for (const auto& e : prep.exclusions) {
      window += e.reason == "outside 35-day window";
      count += e.reason == "race has fewer than 5 polls";
    }
    CHECK(window == 1);
    CHECK(count == 4);
    for (const auto& p : d.polls) {
      CHECK(p.t == doctest::Approx(p.days_to_election / 35.0));
      CHECK(p.t >= 0.0);
      CHECK(p.t <= 1.0);
    }
  }

  TEST_CASE("seven days out gives t = 0.2") {
    const auto parsed = parse_polls_text(std::string(kHeader) + polls_for_race("AZ", 5, 7));
    const auto d = prepare_dataset(parsed.polls, two_results()).dataset;
    const auto it = std::find_if(d.polls.begin(), d.polls.end(),
                                 [](const PreparedPoll& p) { return p.days_to_election == 7; });
    REQUIRE(it != d.polls.end());
    CHECK(it->t == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("even mode drops polls without an undecided share before counting") {
    std::string text = std::string(kHeader) + polls_for_race("AZ", 5, 1);
    text += "nou,AZ,2016,2016-11-01,P,800,48,42,,\n";
    const auto parsed = parse_polls_text(text);
    PrepareOptions opt;
    opt.mode = AllocationMode::Even;
    const auto prep = prepare_dataset(parsed.polls, two_results(), opt);
    CHECK(prep.dataset.polls.size() == 5);
    for (const auto& p : prep.dataset.polls) CHECK(p.u.has_value());
    // One fewer poll leaves the race short under even mode only.
    std::string short_text = std::string(kHeader) + polls_for_race("AZ", 4, 1) +
                             "nou,AZ,2016,2016-11-01,P,800,48,42,,\n";
    const auto short_polls = parse_polls_text(short_text).polls;
    CHECK_NOTHROW(prepare_dataset(short_polls, two_results()));
    CHECK_THROWS_AS(prepare_dataset(short_polls, two_results(), opt), DataError);
  }

  TEST_CASE("houses need the minimum poll count") {
    std::string text = std::string(kHeader) + polls_for_race("AZ", 8, 1, "Big") +
                       polls_for_race("OH", 7, 1, "Small");
    const auto d = prepare_dataset(parse_polls_text(text).polls, two_results()).dataset;
    REQUIRE(d.house_count() == 1);
    CHECK(d.houses[0] == "Big");
    std::size_t housed = 0;
    for (const auto& p : d.polls) housed += p.house.has_value();
    CHECK(housed == 8);
  }

  TEST_CASE("order independence and idempotence") {
    auto spec = testing::small_scenario(6, 9, 4);
    spec.undecided_reporting = 0.7;
    const auto g = synthetic::generate(spec);
    auto shuffled = g.polls;
    std::mt19937_64 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto a = prepare_dataset(g.polls, g.results).dataset;
    const auto b = prepare_dataset(shuffled, g.results).dataset;
    REQUIRE(a.polls.size() == b.polls.size());
    for (std::size_t i = 0; i < a.polls.size(); ++i) {
      CHECK(a.polls[i].source.poll_id == b.polls[i].source.poll_id);
      CHECK(a.polls[i].y == b.polls[i].y);
      CHECK(a.polls[i].race == b.polls[i].race);
      CHECK(a.polls[i].house == b.polls[i].house);
    }
    CHECK(a.houses == b.houses);

    // Re-serialize the surviving polls and prepare again.
    const auto dir = testing::scratch_dir("idempotence");
    std::vector<PollRecord> survivors;
    for (const auto& p : a.polls) survivors.push_back(p.source);
    write_polls_csv((dir / "polls.csv").string(), survivors, ShareUnits::Fraction);
    write_results_csv((dir / "results.csv").string(), a.races);
    PollSchema schema;
    schema.units = ShareUnits::Fraction;
    const auto reparsed = parse_polls((dir / "polls.csv").string(), schema);
    const auto results = parse_results((dir / "results.csv").string());
    CHECK(reparsed.rejects.empty());
    const auto c = prepare_dataset(reparsed.polls, results.results).dataset;
    REQUIRE(c.polls.size() == a.polls.size());
    for (std::size_t i = 0; i < a.polls.size(); ++i) {
      CHECK(c.polls[i].y == a.polls[i].y);
      CHECK(c.polls[i].u == a.polls[i].u);
      CHECK(c.polls[i].t == a.polls[i].t);
    }
    CHECK(c.houses == a.houses);
  }

  TEST_CASE("house counts are consistent") {
    const auto g = synthetic::generate(testing::small_scenario(10, 8, 8));
    const auto& d = g.preparation.dataset;
    std::vector<std::size_t> counts(d.house_count(), 0);
    std::size_t housed = 0;
    for (const auto& p : d.polls) {
      if (p.house) {
        ++counts[*p.house];
        ++housed;
      }
    }
    std::size_t sum = 0;
    for (auto c : counts) {
      CHECK(c >= 8);
      sum += c;
    }
    CHECK(sum == housed);
  }

  TEST_CASE("results parsing") {
    const auto r = parse_results_text(
        "state,year,election_date,rep_votes,dem_votes\n"
        "AZ,2016,2016-11-08,1252401,1161167\n"
        "AZ,2016,2016-11-08,1,1\n"
        "OH,2016,2016-11-08,abc,1\n");
    REQUIRE(r.results.size() == 1);
    CHECK(r.results[0].two_party_outcome == doctest::Approx(1252401.0 / (1252401.0 + 1161167.0)));
    CHECK(r.rejects.size() == 2);
  }

  TEST_CASE("empty dataset is an error") {
    CHECK_THROWS_AS(prepare_dataset({}, two_results()), DataError);
  }
}

TEST_SUITE("csv") {
  TEST_CASE("quoted fields, CRLF and BOM") {
    const auto t = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"he said \"\"hi\"\"\"\r\n\r\n3,4\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.header[0] == "a");
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "he said \"hi\"");
    CHECK(t.lines[1] == 4);
  }

  TEST_CASE("doubles round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) {
      CHECK(std::stod(csv::format_double(v)) == v);
    }
  }

  TEST_CASE("dates") {
    const Date d = Date::parse("2016-11-08");
    CHECK(d.to_string() == "2016-11-08");
    CHECK(d.year() == 2016);
    CHECK(d - Date::parse("2016-10-04") == 35);
    CHECK_THROWS(Date::parse("2016-02-30"));
    CHECK_THROWS(Date::parse("11/08/2016"));
  }
}
