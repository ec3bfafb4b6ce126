#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pollbias/data_ingest.hpp"
#include "pollbias/parameters.hpp"
#include "pollbias/posterior.hpp"
#include "pollbias/sampler.hpp"

namespace pollbias::cli {

struct RunConfig {
  std::string command;
  std::string polls, results, national, out = ".", scenario;
  ShareUnits units = ShareUnits::Percent;
  ModelVariant variant = ModelVariant::Extended;
  PrepareOptions prepare;
  SamplerConfig sampler;
  PriorConfig priors;
  bool quiet = false;

  /// Everything that affects outputs. The config hash covers all of it except
  /// file paths and --quiet.
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Parses argv-style arguments (without the program name) and runs one
/// command. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace pollbias::cli
