#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "metaseir/state_init.hpp"

using namespace metaseir;

namespace {

const Date kStart{2020, 3, 1};

CaseSeries constant_cases(std::size_t regions, std::size_t days, std::int64_t per_day) {
  return CaseSeries(kStart, std::vector<std::vector<std::int64_t>>(regions, std::vector<std::int64_t>(days, per_day)));
}

// Survival sums of a geometric duration with mean `period`, tail summed term
// by term rather than in closed form.
std::vector<double> oracle_weights(double period, int head) {
  const double q = 1.0 - 1.0 / period;
  std::vector<double> w;
  for (int k = 0; k < head; ++k) w.push_back(std::pow(q, k));
  double tail = 0.0;
  for (int k = head; k < 20000; ++k) tail += std::pow(q, k);
  w.push_back(tail);
  return w;
}

}  // namespace

TEST(Weights, MatchSurvivalOracle) {
  for (double nu : {1.0, 1.5, 3.0, 9.0}) {
    const auto w = exposed_weights(nu);
    const auto o = oracle_weights(nu, 6);
    for (int s = 0; s < 7; ++s) EXPECT_NEAR(w[s], o[s], 1e-10) << "nu=" << nu << " s=" << s;
  }
  for (double omega : {1.0, 4.0, 9.0, 14.0}) {
    const auto w = infectious_weights(omega);
    const auto o = oracle_weights(omega, 14);
    for (int s = 0; s < 15; ++s) EXPECT_NEAR(w[s], o[s], 1e-10) << "omega=" << omega << " s=" << s;
  }
}

TEST(Weights, SumToPeriodForRandomPeriods) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> period(1.0, 40.0);
  for (int k = 0; k < 200; ++k) {
    const double nu = period(rng);
    const double omega = period(rng);
    const auto we = exposed_weights(nu);
    const auto wi = infectious_weights(omega);
    EXPECT_NEAR(std::accumulate(we.begin(), we.end(), 0.0), nu, 1e-12 * nu);
    EXPECT_NEAR(std::accumulate(wi.begin(), wi.end(), 0.0), omega, 1e-12 * omega);
    for (double v : we) EXPECT_GE(v, 0.0);
    for (double v : wi) EXPECT_GE(v, 0.0);
  }
}

TEST(Weights, RejectPeriodsBelowOne) {
  EXPECT_THROW(exposed_weights(0.5), Error);
  EXPECT_THROW(infectious_weights(0.0), Error);
}

TEST(Exposed, ZeroAndConstantCases) {
  const CaseSeries zero = constant_cases(1, 30, 0);
  EXPECT_DOUBLE_EQ(exposed_estimate(zero, 0, kStart + 10, 3.0, 1.0), 0.0);
  const CaseSeries ones = constant_cases(1, 30, 1);
  // A constant stream of one case a day sums the weights: exactly ν / a.
  EXPECT_NEAR(exposed_estimate(ones, 0, kStart + 10, 3.0, 1.0), 3.0, 1e-12);
  EXPECT_NEAR(exposed_estimate(ones, 0, kStart + 10, 3.0, 0.5), 6.0, 1e-12);
}

TEST(Exposed, SingleCaseUsesItsWeight) {
  std::vector<std::vector<std::int64_t>> c(1, std::vector<std::int64_t>(30, 0));
  c[0][13] = 5;  // t + 3 for t = day 10
  const CaseSeries cases(kStart, c);
  EXPECT_NEAR(exposed_estimate(cases, 0, kStart + 10, 3.0, 1.0), 5.0 * (2.0 / 3.0) * (2.0 / 3.0), 1e-12);
}

TEST(Exposed, NeedsSevenDaysAhead) {
  const CaseSeries ones = constant_cases(1, 30, 1);
  EXPECT_NO_THROW(exposed_estimate(ones, 0, kStart + 22, 3.0, 1.0));
  try {
    exposed_estimate(ones, 0, kStart + 23, 3.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientLookahead);
  }
}

TEST(TestedInfectious, Examples) {
  EXPECT_DOUBLE_EQ(tested_infectious_estimate(constant_cases(1, 30, 0), 0, kStart + 20, 9.0), 0.0);
  std::vector<std::vector<std::int64_t>> c(1, std::vector<std::int64_t>(30, 0));
  c[0][20] = 10;
  EXPECT_DOUBLE_EQ(tested_infectious_estimate(CaseSeries(kStart, c), 0, kStart + 20, 9.0), 10.0);
  EXPECT_NEAR(tested_infectious_estimate(constant_cases(1, 30, 1), 0, kStart + 20, 9.0), 9.0, 1e-12);
}

TEST(TestedRecovered, Examples) {
  EXPECT_DOUBLE_EQ(tested_recovered_estimate(constant_cases(1, 30, 0), 0, kStart + 20, 9.0), 0.0);
  std::vector<std::vector<std::int64_t>> c(1, std::vector<std::int64_t>(30, 0));
  c[0][20] = 10;
  EXPECT_DOUBLE_EQ(tested_recovered_estimate(CaseSeries(kStart, c), 0, kStart + 20, 9.0), 0.0);
  EXPECT_NEAR(tested_recovered_estimate(constant_cases(1, 120, 1), 0, kStart + 99, 9.0), 91.0, 1e-9);
}

TEST(TestedRecovered, NegativeIsClampedWithWarning) {
  // The tail weight ω·q^14 exceeds one, so a single old case implies more
  // infectious than reported.
  std::vector<std::vector<std::int64_t>> c(1, std::vector<std::int64_t>(30, 0));
  c[0][6] = 10;
  Diagnostics diag;
  EXPECT_DOUBLE_EQ(tested_recovered_estimate(CaseSeries(kStart, c), 0, kStart + 20, 9.0, &diag), 0.0);
  EXPECT_EQ(diag.warnings().size(), 1u);
}

TEST(TestedFraction, RatioClampAndErrors) {
  // One case a day in each of two regions: ΣÎ_T = 2ω = 18.
  const CaseSeries cases = constant_cases(2, 40, 1);
  const Date d = kStart + 20;
  PrevalenceSeries prev;
  prev.add(d, 72.0);
  EXPECT_NEAR(tested_fraction(cases, prev, d, 9.0), 0.25, 1e-12);

  PrevalenceSeries small;
  small.add(d, 9.0);
  Diagnostics diag;
  EXPECT_DOUBLE_EQ(tested_fraction(cases, small, d, 9.0, &diag), 1.0);
  EXPECT_EQ(diag.warnings().size(), 1u);

  try {
    tested_fraction(constant_cases(2, 40, 0), prev, d, 9.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonpositiveTestedFraction);
  }
  PrevalenceSeries zero;
  zero.add(d, 0.0);
  try {
    tested_fraction(cases, zero, d, 9.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonpositivePrevalence);
  }
}

TEST(Initialize, SteadyStreamOneRegion) {
  const CaseSeries cases = constant_cases(1, 120, 1);
  const Date d = kStart + 99;  // cumulative 100
  const std::vector<double> pop{1000.0};
  const RegionalState s = initialize_state(cases, pop, d, 3.0, 9.0, 0.5);
  const Compartments& c = s.regions[0];
  EXPECT_NEAR(c.exposed, 6.0, 1e-9);
  EXPECT_NEAR(c.infectious_tested, 9.0, 1e-9);
  EXPECT_NEAR(c.infectious_untested, 9.0, 1e-9);
  EXPECT_NEAR(c.recovered_tested, 91.0, 1e-9);
  EXPECT_NEAR(c.recovered_untested, 91.0, 1e-9);
  EXPECT_NEAR(c.susceptible, 794.0, 1e-9);
  EXPECT_NEAR(c.total(), 1000.0, 1e-9);
}

TEST(Initialize, FullTestingHasNoUntested) {
  const CaseSeries cases = constant_cases(2, 60, 3);
  const std::vector<double> pop{1e4, 2e4};
  const RegionalState s = initialize_state(cases, pop, kStart + 30, 3.0, 9.0, 1.0);
  for (const auto& c : s.regions) {
    EXPECT_EQ(c.infectious_untested, 0.0);
    EXPECT_EQ(c.recovered_untested, 0.0);
  }
}

TEST(Initialize, ConservesPopulationOnRandomCases) {
  std::mt19937_64 rng(5);
  std::poisson_distribution<std::int64_t> count(20.0);
  std::vector<std::vector<std::int64_t>> c(6, std::vector<std::int64_t>(80));
  for (auto& row : c) {
    for (auto& v : row) v = count(rng);
  }
  const CaseSeries cases(kStart, c);
  const std::vector<double> pop{5e4, 6e4, 7e4, 8e4, 9e4, 1e5};
  for (int k = 0; k < 60; ++k) {
    const RegionalState s = initialize_state(cases, pop, kStart + k, 3.0, 9.0, 0.3);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      EXPECT_NEAR(s.regions[i].total(), pop[i], 1e-9 * pop[i]);
      EXPECT_GE(s.regions[i].susceptible, 0.0);
      EXPECT_GE(s.regions[i].recovered_tested, 0.0);
    }
  }
}

TEST(Initialize, BurdenAbovePopulationFails) {
  const CaseSeries cases = constant_cases(1, 60, 100);
  const std::vector<double> pop{500.0};
  try {
    initialize_state(cases, pop, kStart + 40, 3.0, 9.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeSusceptible);
  }
}

TEST(Initialize, ZeroEpidemicIsFullySusceptible) {
  const RegionTable regions({{"A", "", 100, {}}, {"B", "", 300, {}}});
  const CaseSeries cases = constant_cases(2, 40, 0);
  PrevalenceSeries prev;
  prev.add(kStart + 10, 0.0);
  Diagnostics diag;
  const RegionalState s = initialize_state(cases, prev, regions, kStart + 10, 3.0, 9.0, &diag);
  EXPECT_DOUBLE_EQ(s.regions[0].susceptible, 100.0);
  EXPECT_DOUBLE_EQ(s.regions[1].susceptible, 300.0);
  EXPECT_DOUBLE_EQ(s.regions[1].exposed + s.regions[1].infectious() + s.regions[1].recovered_tested, 0.0);
  EXPECT_FALSE(diag.warnings().empty());
}
