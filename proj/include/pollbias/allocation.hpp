#pragma once

#include <stdexcept>
#include <string_view>

namespace pollbias {

/// How undecided respondents are split between the two major candidates
/// when forming the two-party poll share.
enum class AllocationMode { Proportional, Even };

std::string_view to_string(AllocationMode mode);
AllocationMode parse_allocation_mode(std::string_view text);

class AllocationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace allocation {

// R / (R + D). Undecided and third-party respondents are dropped.
double proportional_share(double rep, double dem);

// (R + lambda U) / (R + D + U), 0 <= lambda <= 1.
double allocated_share(double rep, double dem, double und, double lambda);

// U / (R + D + U).
double scaled_undecided(double rep, double dem, double und);

/// Deterministic part of lambda under `mode`: R/(R+D) or 1/2.
double lambda_base(AllocationMode mode, double rep, double dem);

/// Two-party Republican share under `mode`. Even mode needs `und`; a poll
/// without a reported undecided share cannot be even-allocated.
double two_party_share(AllocationMode mode, double rep, double dem, double und);

/// allocated_share(R, D, U, R/(R+D) + theta) - (R/(R+D) + u theta), which is
/// identically zero. Kept as an executable check of the allocation identity.
double identity_residual(double rep, double dem, double und, double theta);

}  // namespace allocation
}  // namespace pollbias
