#include "pollbias/allocation.hpp"

#include <string>

namespace pollbias {

std::string_view to_string(AllocationMode mode) {
  return mode == AllocationMode::Proportional ? "proportional" : "even";
}

AllocationMode parse_allocation_mode(std::string_view text) {
  if (text == "proportional") return AllocationMode::Proportional;
  if (text == "even") return AllocationMode::Even;
  throw std::invalid_argument("unknown allocation mode '" + std::string(text) +
                              "' (expected proportional|even)");
}

namespace allocation {
namespace {

void check_shares(double rep, double dem, double und) {
  if (!(rep >= 0.0) || !(dem >= 0.0) || !(und >= 0.0))
    throw AllocationError("shares must be nonnegative");
}

}  // namespace

double proportional_share(double rep, double dem) {
  check_shares(rep, dem, 0.0);
  if (rep + dem <= 0.0) throw AllocationError("no two-party support");
  return rep / (rep + dem);
}

double allocated_share(double rep, double dem, double und, double lambda) {
  check_shares(rep, dem, und);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw AllocationError("lambda outside [0, 1]");
  const double total = rep + dem + und;
  if (total <= 0.0) throw AllocationError("no respondents to allocate");
  return (rep + lambda * und) / total;
}

double scaled_undecided(double rep, double dem, double und) {
  check_shares(rep, dem, und);
  const double total = rep + dem + und;
  if (total <= 0.0) throw AllocationError("no respondents to allocate");
  return und / total;
}

double lambda_base(AllocationMode mode, double rep, double dem) {
  return mode == AllocationMode::Even ? 0.5 : proportional_share(rep, dem);
}

double two_party_share(AllocationMode mode, double rep, double dem, double und) {
  if (mode == AllocationMode::Proportional) return proportional_share(rep, dem);
  return allocated_share(rep, dem, und, 0.5);
}

double identity_residual(double rep, double dem, double und, double theta) {
  const double y = proportional_share(rep, dem);
  const double lambda = y + theta;
  return allocated_share(rep, dem, und, lambda) - (y + scaled_undecided(rep, dem, und) * theta);
}

}  // namespace allocation
}  // namespace pollbias
