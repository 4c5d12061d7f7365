#ifndef METASEIR_FORECAST_HPP
#define METASEIR_FORECAST_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "metaseir/dynamics.hpp"
#include "metaseir/error.hpp"
#include "metaseir/estimation.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/metrics.hpp"
#include "metaseir/state_init.hpp"

namespace metaseir {

/// Forecast protocol: initialize 7 days before the issue date, average the
/// parameters of the 7 days before that, simulate 21 days and report the
/// last 14.
inline constexpr int kForecastInitOffset = 7;
inline constexpr int kForecastAverageDays = 7;
inline constexpr int kForecastSimulatedDays = 21;
inline constexpr int kForecastReportedDays = 14;

struct RatePair {
  double beta_loc = 0.0;
  double beta_mob = 0.0;
};

/// What the forecast needs from one day of estimation.
struct DailyEstimate {
  double beta_loc = 0.0;
  double beta_mob = 0.0;
  double tested_fraction = 1.0;
  std::vector<RatePair> replicas;
};

using EstimateHistory = std::map<Date, DailyEstimate>;
using MobilityProvider = std::function<MobilityMatrix(Date)>;

struct Forecast {
  Date issue_date;
  /// Per region: reported cases over [issue_date, issue_date + 14).
  std::vector<double> point;
  std::vector<double> lo95;
  std::vector<double> hi95;
  /// scenarios[b][i], one scenario per bootstrap replica.
  std::vector<std::vector<double>> scenarios;
  std::vector<double> scenario_national;
  double national_total = 0.0;
  /// point[i] / national_total; empty when the national total is zero.
  std::vector<std::optional<double>> fractions;

  bool has_fractions() const { return national_total > 0.0; }
};

struct ForecastSettings {
  double latent_period = 3.0;
  double infectious_period = 9.0;
  ModelVariant variant;
};

namespace detail {

inline std::vector<double> simulate_reported(const RegionalState& initial, const EpidemicParams& params,
                                             const std::vector<MobilityMatrix>& mobility) {
  SimulationConfig config;
  config.horizon = kForecastSimulatedDays;
  config.params = {params};
  config.mobility = mobility;
  const Trajectory traj = simulate(initial, config);
  std::vector<double> totals(initial.size(), 0.0);
  for (int k = kForecastSimulatedDays - kForecastReportedDays; k < kForecastSimulatedDays; ++k) {
    for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += traj.new_reported[k][i];
  }
  return totals;
}

}  // namespace detail

inline Forecast make_forecast(const CaseSeries& cases, const PrevalenceSeries& prevalence,
                              const RegionTable& regions, const MobilityProvider& mobility,
                              const EstimateHistory& history, Date issue_date, const ForecastSettings& settings,
                              Diagnostics* diag = nullptr) {
  const Date init_date = issue_date - kForecastInitOffset;
  const Date window_start = init_date - kForecastAverageDays;

  DailyEstimate mean;
  mean.beta_loc = mean.beta_mob = mean.tested_fraction = 0.0;
  std::size_t scenario_count = std::numeric_limits<std::size_t>::max();
  for (Date d = window_start; d < init_date; ++d) {
    auto it = history.find(d);
    if (it == history.end()) {
      throw Error(ErrorCode::MissingEstimates,
                  fmt::format("forecast issued {} needs estimates for {} .. {}; {} missing", issue_date,
                              window_start, init_date - 1, d));
    }
    mean.beta_loc += it->second.beta_loc / kForecastAverageDays;
    mean.beta_mob += it->second.beta_mob / kForecastAverageDays;
    mean.tested_fraction += it->second.tested_fraction / kForecastAverageDays;
    scenario_count = std::min(scenario_count, it->second.replicas.size());
  }
  mean.replicas.assign(scenario_count, RatePair{});
  for (Date d = window_start; d < init_date; ++d) {
    const DailyEstimate& e = history.at(d);
    if (e.replicas.size() != scenario_count) {
      detail::warn(diag, fmt::format("{}: {} replicas, using the first {}", d, e.replicas.size(), scenario_count));
    }
    for (std::size_t b = 0; b < scenario_count; ++b) {
      mean.replicas[b].beta_loc += e.replicas[b].beta_loc / kForecastAverageDays;
      mean.replicas[b].beta_mob += e.replicas[b].beta_mob / kForecastAverageDays;
    }
  }
  if (!settings.variant.with_mobility) {
    mean.beta_mob = 0.0;
    for (RatePair& r : mean.replicas) r.beta_mob = 0.0;
  }

  const RegionalState initial = initialize_state(cases, prevalence, regions, init_date, settings.latent_period,
                                                 settings.infectious_period, diag);
  std::vector<MobilityMatrix> daily_mobility;
  daily_mobility.reserve(kForecastSimulatedDays);
  for (int k = 0; k < kForecastSimulatedDays; ++k) daily_mobility.push_back(mobility(init_date + k));

  EpidemicParams params;
  params.latent_period = settings.latent_period;
  params.infectious_period = settings.infectious_period;
  params.tested_fraction = mean.tested_fraction;
  params.beta_loc = mean.beta_loc;
  params.beta_mob = mean.beta_mob;

  Forecast out;
  out.issue_date = issue_date;
  out.point = detail::simulate_reported(initial, params, daily_mobility);
  for (double v : out.point) out.national_total += v;
  for (const RatePair& r : mean.replicas) {
    EpidemicParams scenario = params;
    scenario.beta_loc = r.beta_loc;
    scenario.beta_mob = r.beta_mob;
    out.scenarios.push_back(detail::simulate_reported(initial, scenario, daily_mobility));
    double total = 0.0;
    for (double v : out.scenarios.back()) total += v;
    out.scenario_national.push_back(total);
  }
  const std::size_t n = out.point.size();
  out.lo95.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.hi95.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (!out.scenarios.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> column;
      column.reserve(out.scenarios.size());
      for (const auto& s : out.scenarios) column.push_back(s[i]);
      const Interval band = percentile_interval(column);
      out.lo95[i] = band.lo;
      out.hi95[i] = band.hi;
    }
  }
  out.fractions.assign(n, std::nullopt);
  if (out.has_fractions()) {
    for (std::size_t i = 0; i < n; ++i) out.fractions[i] = out.point[i] / out.national_total;
  } else {
    detail::warn(diag, fmt::format("forecast issued {}: national total is zero, fractions undefined", issue_date));
  }
  return out;
}

/// Reported cases per region over [start, start + days).
inline std::vector<double> reported_totals(const CaseSeries& cases, Date start, int days = kForecastReportedDays) {
  std::vector<double> totals(cases.regions(), 0.0);
  for (int k = 0; k < days; ++k) {
    for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += static_cast<double>(cases.at(i, start + k));
  }
  return totals;
}

/// National daily reported cases implied by initialization alone:
/// Σ_i a(t)·Ê_i(t)/ν for t in [from, to].
inline std::vector<double> national_validation_init(const CaseSeries& cases, double latent_period,
                                                    const std::function<double(Date)>& tested_fraction_on,
                                                    Date from, Date to) {
  std::vector<double> out;
  for (Date d = from; d <= to; ++d) {
    const double a = tested_fraction_on(d);
    double total = 0.0;
    for (std::size_t i = 0; i < cases.regions(); ++i) {
      total += a * exposed_estimate(cases, i, d, latent_period, a) / latent_period;
    }
    out.push_back(total);
  }
  return out;
}

struct EvaluationReport {
  double rmse = 0.0;
  double spearman = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> errors;
};

/// Compares a forecast to realized per-region totals. Spearman is NaN when
/// either side has no order (zero totals or all values identical).
inline EvaluationReport evaluate(const Forecast& forecast, std::span<const double> actual) {
  EvaluationReport report;
  report.rmse = rmse(forecast.point, actual);
  for (std::size_t i = 0; i < actual.size(); ++i) report.errors.push_back(forecast.point[i] - actual[i]);
  double actual_total = 0.0;
  for (double v : actual) actual_total += v;
  if (forecast.has_fractions() && actual_total > 0.0) {
    std::vector<double> f;
    std::vector<double> a;
    for (std::size_t i = 0; i < actual.size(); ++i) {
      f.push_back(*forecast.fractions[i]);
      a.push_back(actual[i] / actual_total);
    }
    try {
      report.spearman = spearman(f, a);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRanks) throw;
    }
  }
  return report;
}

struct ForecastComparison {
  Date issue_date;
  EvaluationReport with_mobility;
  EvaluationReport without_mobility;

  double rmse_difference() const { return with_mobility.rmse - without_mobility.rmse; }
  double spearman_difference() const { return with_mobility.spearman - without_mobility.spearman; }
};

/// Paired RMSE and Spearman for forecasts with and without mobility.
/// `actual` maps an issue date to realized per-region totals.
inline std::vector<ForecastComparison> compare_models(std::span<const Forecast> with_mobility,
                                                      std::span<const Forecast> without_mobility,
                                                      const std::function<std::vector<double>(Date)>& actual) {
  if (with_mobility.size() != without_mobility.size()) {
    throw Error(ErrorCode::MismatchedDates, "forecast sets differ in length");
  }
  std::vector<ForecastComparison> out;
  for (std::size_t k = 0; k < with_mobility.size(); ++k) {
    if (with_mobility[k].issue_date != without_mobility[k].issue_date) {
      throw Error(ErrorCode::MismatchedDates, fmt::format("issue dates {} and {} differ",
                                                          with_mobility[k].issue_date,
                                                          without_mobility[k].issue_date));
    }
    const std::vector<double> realized = actual(with_mobility[k].issue_date);
    out.push_back({with_mobility[k].issue_date, evaluate(with_mobility[k], realized),
                   evaluate(without_mobility[k], realized)});
  }
  return out;
}

}  // namespace metaseir

#endif  // METASEIR_FORECAST_HPP
