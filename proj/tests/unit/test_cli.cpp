#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pollbias/cli.hpp"
#include "support.hpp"

using namespace pollbias;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = 0;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// Simulates a small scenario into `dir` and fits it briefly.
void simulate_and_fit(const fs::path& dir, const std::string& mode = "proportional") {
  write_file(dir / "spec.json", synthetic::scenario_to_json(testing::small_scenario(6, 8, 21)).dump());
  const std::string d = dir.string();
  REQUIRE(invoke({"simulate", "--scenario", d + "/spec.json", "--out", d, "--mode", mode, "-q"}).status == 0);
  const auto fit = invoke({"fit", "--polls", d + "/polls.csv", "--results", d + "/results.csv", "--out", d,
                           "--mode", mode, "--chains", "2", "--warmup", "150", "--samples", "100",
                           "--seed", "5", "-q"});
  REQUIRE(fit.status == 0);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate, fit, summarize, report") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    const std::string d = dir.string();
    simulate_and_fit(dir);
    for (const char* f : {"polls.csv", "results.csv", "truth.csv", "scenario.json", "simulate_manifest.json",
                          "draws.csv", "diagnostics.json", "fit_manifest.json", "prepared.csv"}) {
      CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    const auto fit = read_json(dir / "fit_manifest.json");
    CHECK(fit.contains("config_hash"));
    CHECK(fit.contains("dataset_hash"));
    CHECK_FALSE(fit.contains("timestamp"));

    REQUIRE(invoke({"summarize", "--out", d, "-q"}).status == 0);
    for (const char* f : {"bias_report.csv", "house_table.csv", "gamma_intervals.csv", "group_scatter.csv",
                          "histograms.csv", "report.json", "summarize_manifest.json"}) {
      CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    const auto rep = invoke({"report", "--out", d});
    REQUIRE(rep.status == 0);
    CHECK(rep.out.find("Average absolute bias") != std::string::npos);
    CHECK(fs::exists(dir / "report.md"));
  }

  TEST_CASE("reruns are byte-identical") {
    const auto a = testing::scratch_dir("cli_rerun_a"), b = testing::scratch_dir("cli_rerun_b");
    simulate_and_fit(a);
    simulate_and_fit(b);
    CHECK(slurp(a / "polls.csv") == slurp(b / "polls.csv"));
    CHECK(slurp(a / "draws.csv") == slurp(b / "draws.csv"));
    CHECK(read_json(a / "fit_manifest.json")["config_hash"] == read_json(b / "fit_manifest.json")["config_hash"]);
  }

  TEST_CASE("even-mode fit summarizes without repeating --mode") {
    const auto dir = testing::scratch_dir("cli_even");
    const std::string d = dir.string();
    simulate_and_fit(dir, "even");
    CHECK(invoke({"summarize", "--out", d, "-q"}).status == 0);
    CHECK(read_json(dir / "report.json")["allocation_mode"] == "even");
    const auto mismatch = invoke({"summarize", "--out", d, "--mode", "proportional", "-q"});
    CHECK(mismatch.status == 2);
    CHECK(read_json(dir / "error.json")["kind"] == "usage");
  }

  TEST_CASE("unconverged fits carry a warning into the report") {
    const auto dir = testing::scratch_dir("cli_warn");
    const std::string d = dir.string();
    simulate_and_fit(dir);
    auto fit = read_json(dir / "fit_manifest.json");
    fit["converged"] = false;
    write_file(dir / "fit_manifest.json", fit.dump(2));
    const auto s = invoke({"summarize", "--out", d, "-q"});
    REQUIRE(s.status == 0);
    CHECK(s.err.find("WARNING") != std::string::npos);
    CHECK(read_json(dir / "report.json")["converged"] == false);
    CHECK(invoke({"report", "--out", d}).out.find("WARNING") != std::string::npos);
  }

  TEST_CASE("failures write error.json") {
    const auto dir = testing::scratch_dir("cli_error");
    const std::string d = dir.string();
    const auto r = invoke({"ingest", "--polls", d + "/missing.csv", "--results", d + "/missing.csv", "--out", d});
    CHECK(r.status == 1);
    const auto e = read_json(dir / "error.json");
    CHECK(e["command"] == "ingest");
    CHECK(e["error"].get<std::string>().find("missing.csv") != std::string::npos);

    CHECK(invoke({"ingest", "--out", d}).status == 2);
    CHECK(invoke({"bogus"}).status != 0);
    CHECK(invoke({"summarize", "--out", d}).status == 2);
  }

  TEST_CASE("config files") {
    const auto dir = testing::scratch_dir("cli_config");
    cli::RunConfig cfg;
    cfg.polls = "p.csv";
    cfg.results = "r.csv";
    cfg.prepare.mode = AllocationMode::Even;
    cfg.sampler.chains = 3;
    cfg.variant = ModelVariant::Baseline;
    const auto back = cli::RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.prepare.mode == AllocationMode::Even);
    CHECK(back.variant == ModelVariant::Baseline);

    write_file(dir / "bad.json", R"({"chains": 2, "chain_count": 4})");
    const auto r = invoke({"ingest", "--config", (dir / "bad.json").string(), "--out", dir.string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("chain_count") != std::string::npos);
  }

  TEST_CASE("fnv1a") {
    CHECK(cli::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
  }
}
