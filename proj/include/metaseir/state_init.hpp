#ifndef METASEIR_STATE_INIT_HPP
#define METASEIR_STATE_INIT_HPP

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "metaseir/date.hpp"
#include "metaseir/error.hpp"
#include "metaseir/ingest.hpp"

namespace metaseir {

/// Six compartments of one region, in persons.
struct Compartments {
  double susceptible = 0.0;
  double exposed = 0.0;
  double infectious_tested = 0.0;
  double infectious_untested = 0.0;
  double recovered_tested = 0.0;
  double recovered_untested = 0.0;

  double total() const {
    return susceptible + exposed + infectious_tested + infectious_untested + recovered_tested +
           recovered_untested;
  }
  double infectious() const { return infectious_tested + infectious_untested; }
};

struct RegionalState {
  Date date;
  std::vector<double> population;
  std::vector<Compartments> regions;

  std::size_t size() const noexcept { return regions.size(); }
};

struct EpidemicParams {
  double latent_period = 3.0;
  double infectious_period = 9.0;
  double tested_fraction = 1.0;
  double beta_loc = 0.0;
  double beta_mob = 0.0;
  double dispersion = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(latent_period > 0.0) || !(infectious_period > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "latent and infectious periods must be positive");
    }
    if (!(tested_fraction > 0.0 && tested_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidParameter,
                  fmt::format("tested fraction {} outside (0, 1]", tested_fraction));
    }
    if (!(beta_loc >= 0.0) || !(beta_mob >= 0.0) || !std::isfinite(beta_loc) || !std::isfinite(beta_mob)) {
      throw Error(ErrorCode::InvalidParameter, "transmission rates must be finite and nonnegative");
    }
    if (!(dispersion > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "dispersion must be positive");
    }
  }
};

inline constexpr int kLookAhead = 7;
inline constexpr int kLookBack = 14;

namespace detail {

inline void require_period(double period, const char* what) {
  // A geometric law with success probability 1/period needs period >= 1.
  if (!(period >= 1.0) || !std::isfinite(period)) {
    throw Error(ErrorCode::InvalidParameter, fmt::format("{} must be >= 1 day, got {}", what, period));
  }
}

inline void require_fraction(double a) {
  if (!(a > 0.0 && a <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, fmt::format("tested fraction {} outside (0, 1]", a));
  }
}

}  // namespace detail

/// Weights on ΔI(t+1) … ΔI(t+7): (1-1/ν)^(s-1) for s = 1..6, and the tail
/// mass ν(1-1/ν)^6 on day t+7. They sum to ν.
inline std::array<double, kLookAhead> exposed_weights(double latent_period) {
  detail::require_period(latent_period, "latent period");
  const double q = 1.0 - 1.0 / latent_period;
  std::array<double, kLookAhead> w{};
  double power = 1.0;
  for (int s = 1; s < kLookAhead; ++s) {
    w[s - 1] = power;
    power *= q;
  }
  w[kLookAhead - 1] = latent_period * power;
  return w;
}

/// Weights on ΔI(t) … ΔI(t-14): (1-1/ω)^s for s = 0..13, and the tail mass
/// ω(1-1/ω)^14 on day t-14. They sum to ω.
inline std::array<double, kLookBack + 1> infectious_weights(double infectious_period) {
  detail::require_period(infectious_period, "infectious period");
  const double q = 1.0 - 1.0 / infectious_period;
  std::array<double, kLookBack + 1> w{};
  double power = 1.0;
  for (int s = 0; s < kLookBack; ++s) {
    w[s] = power;
    power *= q;
  }
  w[kLookBack] = infectious_period * power;
  return w;
}

/// Persons exposed on `date` in `region`, inferred from the next seven days
/// of reported cases.
inline double exposed_estimate(const CaseSeries& cases, std::size_t region, Date date, double latent_period,
                               double tested_fraction) {
  detail::require_fraction(tested_fraction);
  if (cases.days() == 0 || date + kLookAhead > cases.last_date()) {
    throw Error(ErrorCode::InsufficientLookahead,
                fmt::format("exposed estimate on {} needs cases through {}", date, date + kLookAhead));
  }
  const auto w = exposed_weights(latent_period);
  double sum = 0.0;
  for (int s = 1; s <= kLookAhead; ++s) {
    sum += w[s - 1] * static_cast<double>(cases.at(region, date + s));
  }
  return sum / tested_fraction;
}

/// Positively tested persons still infectious on `date`.
inline double tested_infectious_estimate(const CaseSeries& cases, std::size_t region, Date date,
                                         double infectious_period) {
  const auto w = infectious_weights(infectious_period);
  double sum = 0.0;
  for (int s = 0; s <= kLookBack; ++s) {
    sum += w[s] * static_cast<double>(cases.at(region, date - s));
  }
  return sum;
}

/// Positively tested persons recovered by `date`: all reported cases so far
/// minus those still infectious. Negative values are clamped to zero.
inline double tested_recovered_estimate(const CaseSeries& cases, std::size_t region, Date date,
                                        double infectious_period, Diagnostics* diag = nullptr) {
  const double recovered = static_cast<double>(cases.cumulative(region, date)) -
                           tested_infectious_estimate(cases, region, date, infectious_period);
  if (recovered < 0.0) {
    detail::warn(diag, fmt::format("tested recovered estimate {} for region {} on {} clamped to 0", recovered,
                                   region, date));
    return 0.0;
  }
  return recovered;
}

/// National share of infectious persons that tested positive on `date`.
inline double tested_fraction(const CaseSeries& cases, const PrevalenceSeries& prevalence, Date date,
                              double infectious_period, Diagnostics* diag = nullptr) {
  const double total = prevalence.at(date);
  if (!(total > 0.0)) {
    throw Error(ErrorCode::NonpositivePrevalence, fmt::format("prevalence on {} is {}", date, total));
  }
  double tested = 0.0;
  for (std::size_t r = 0; r < cases.regions(); ++r) {
    tested += tested_infectious_estimate(cases, r, date, infectious_period);
  }
  const double a = tested / total;
  if (!(a > 0.0)) {
    throw Error(ErrorCode::NonpositiveTestedFraction,
                fmt::format("no tested infectious persons on {}; tested fraction undefined", date));
  }
  if (a > 1.0) {
    detail::warn(diag, fmt::format("tested fraction {} on {} exceeds 1, clamped", a, date));
    return 1.0;
  }
  return a;
}

/// All six compartments on `date` for a given tested fraction.
inline RegionalState initialize_state(const CaseSeries& cases, std::span<const double> population, Date date,
                                      double latent_period, double infectious_period, double tested_fraction,
                                      Diagnostics* diag = nullptr) {
  detail::require_fraction(tested_fraction);
  if (population.size() != cases.regions()) {
    throw Error(ErrorCode::MismatchedRegions, "population and case series differ in region count");
  }
  const double untested_ratio = (1.0 - tested_fraction) / tested_fraction;
  RegionalState state;
  state.date = date;
  state.population.assign(population.begin(), population.end());
  state.regions.resize(population.size());
  for (std::size_t r = 0; r < population.size(); ++r) {
    Compartments& c = state.regions[r];
    c.exposed = exposed_estimate(cases, r, date, latent_period, tested_fraction);
    c.infectious_tested = tested_infectious_estimate(cases, r, date, infectious_period);
    c.recovered_tested = tested_recovered_estimate(cases, r, date, infectious_period, diag);
    c.infectious_untested = untested_ratio * c.infectious_tested;
    c.recovered_untested = untested_ratio * c.recovered_tested;
    c.susceptible = population[r] - c.exposed - c.infectious_tested - c.infectious_untested -
                    c.recovered_tested - c.recovered_untested;
    if (c.susceptible < 0.0) {
      throw Error(ErrorCode::NegativeSusceptible,
                  fmt::format("region {} on {}: inferred burden exceeds population {}", r, date, population[r]));
    }
  }
  return state;
}

/// All six compartments on `date`, with the tested fraction derived from the
/// national prevalence estimate. When no case has ever been reported and
/// none is due within the look-ahead, every region is fully susceptible and
/// the fraction is irrelevant.
inline RegionalState initialize_state(const CaseSeries& cases, const PrevalenceSeries& prevalence,
                                      const RegionTable& regions, Date date, double latent_period,
                                      double infectious_period, Diagnostics* diag = nullptr) {
  const auto population = regions.populations();
  double a = 1.0;
  try {
    a = tested_fraction(cases, prevalence, date, infectious_period, diag);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonpositiveTestedFraction && e.code() != ErrorCode::NonpositivePrevalence) throw;
    for (std::size_t r = 0; r < cases.regions(); ++r) {
      if (cases.cumulative(r, date) > 0 || exposed_estimate(cases, r, date, latent_period, 1.0) > 0.0) throw;
    }
    detail::warn(diag, fmt::format("no cases reported by {}; state initialized as fully susceptible", date));
  }
  return initialize_state(cases, population, date, latent_period, infectious_period, a, diag);
}

}  // namespace metaseir

#endif  // METASEIR_STATE_INIT_HPP
