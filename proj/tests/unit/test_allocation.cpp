#include <doctest.h>

#include <random>

#include "pollbias/allocation.hpp"

using namespace pollbias;
using namespace pollbias::allocation;

TEST_SUITE("allocation") {
  TEST_CASE("proportional share drops undecided and third party") {
    CHECK(proportional_share(0.48, 0.42) == doctest::Approx(0.48 / 0.90).epsilon(1e-15));
    CHECK(two_party_share(AllocationMode::Proportional, 0.48, 0.42, 0.06) ==
          proportional_share(0.48, 0.42));
    CHECK_THROWS_AS(proportional_share(0.0, 0.0), AllocationError);
  }

  TEST_CASE("even allocation gives half the undecided to each side") {
    // (0.48 + 0.03) / 0.96
    CHECK(two_party_share(AllocationMode::Even, 0.48, 0.42, 0.06) ==
          doctest::Approx(0.51 / 0.96).epsilon(1e-15));
    CHECK(lambda_base(AllocationMode::Even, 0.3, 0.6) == 0.5);
    CHECK(lambda_base(AllocationMode::Proportional, 0.3, 0.6) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("allocated share rejects lambda outside the unit interval") {
    CHECK_THROWS_AS(allocated_share(0.4, 0.4, 0.2, 1.5), AllocationError);
    CHECK_THROWS_AS(allocated_share(0.4, 0.4, 0.2, -0.1), AllocationError);
    CHECK(allocated_share(0.4, 0.4, 0.2, 1.0) == doctest::Approx(0.6));
  }

  TEST_CASE("scaled undecided") {
    CHECK(scaled_undecided(0.45, 0.45, 0.05) == doctest::Approx(0.05 / 0.95));
  }

  TEST_CASE("even minus proportional equals u times (1/2 - R/(R+D))") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    for (int i = 0; i < 2000; ++i) {
      const double r = unit(rng), d = unit(rng), u = unit(rng) / 3;
      const double diff = two_party_share(AllocationMode::Even, r, d, u) -
                          two_party_share(AllocationMode::Proportional, r, d, u);
      const double expected = scaled_undecided(r, d, u) * (0.5 - r / (r + d));
      CHECK(std::abs(diff - expected) < 1e-14);
    }
  }

  TEST_CASE("mode names round-trip") {
    CHECK(parse_allocation_mode(to_string(AllocationMode::Even)) == AllocationMode::Even);
    CHECK(parse_allocation_mode("proportional") == AllocationMode::Proportional);
    CHECK_THROWS(parse_allocation_mode("uniform"));
  }
}
