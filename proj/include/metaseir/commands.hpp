#ifndef METASEIR_COMMANDS_HPP
#define METASEIR_COMMANDS_HPP

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metaseir/config.hpp"
#include "metaseir/csv.hpp"
#include "metaseir/dynamics.hpp"
#include "metaseir/error.hpp"
#include "metaseir/forecast.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/metrics.hpp"
#include "metaseir/parallel.hpp"
#include "metaseir/pipeline.hpp"

namespace metaseir {

inline InputData load_inputs(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  auto require = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw Error(ErrorCode::ConfigError, fmt::format("'{}' path is not configured", key));
    if (!std::filesystem::exists(p)) {
      throw Error(ErrorCode::IoError, fmt::format("'{}' file '{}' does not exist", key, p.string()));
    }
  };
  require(cfg.regions, "regions");
  require(cfg.cases, "cases");
  require(cfg.mobility, "mobility");
  require(cfg.reductions, "reductions");
  require(cfg.prevalence, "prevalence");
  InputData data;
  data.regions = load_regions(cfg.regions);
  data.cases = load_cases(cfg.cases, data.regions, std::nullopt, diag);
  data.baseline = load_mobility_baseline(cfg.mobility, data.regions, diag);
  data.reductions = load_reductions(cfg.reductions);
  data.prevalence = load_prevalence(cfg.prevalence);
  return data;
}

inline EstimationSettings estimation_settings(const RunConfig& cfg) {
  EstimationSettings s;
  s.latent_period = cfg.latent_period;
  s.infectious_period = cfg.infectious_period;
  s.family = cfg.family;
  s.include_mobility_variant = !cfg.no_mobility;
  s.bootstrap_replicas = cfg.bootstrap;
  s.seed = cfg.seed;
  return s;
}

/// state.csv for every date in the window.
inline void run_init_state(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  auto out = open_output(cfg.out / "state.csv");
  write_state_header(out);
  for (Date d = *cfg.from; d <= *cfg.to; ++d) {
    write_state_rows(out, initialize_state(data.cases, data.prevalence, data.regions, d, cfg.latent_period,
                                           cfg.infectious_period, diag),
                     data.regions);
  }
}

/// estimates.csv and replicas.csv for the configured family, with and
/// (unless disabled) without mobility.
inline void run_estimate(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  const auto records = estimate_window(data, *cfg.from, *cfg.to, estimation_settings(cfg), diag);
  auto est = open_output(cfg.out / "estimates.csv");
  write_estimates(est, records);
  auto rep = open_output(cfg.out / "replicas.csv");
  write_replicas(rep, records);
}

namespace detail {

inline std::set<Date> first_days_of_month(Date from, Date to) {
  std::set<Date> out;
  for (Date d = from + 1; d <= to; ++d) {
    if (d.day_of_month() == 1) out.insert(d);
  }
  return out;
}

struct SimulationRun {
  Trajectory trajectory;
  std::vector<EpidemicParams> params;
  std::vector<MobilityMatrix> mobility;
};

/// Simulates [from, to] from the state initialized on `from`, using the
/// estimated rates and tested fraction of each day and re-initializing on
/// the first of every month.
inline SimulationRun simulate_estimated(const RunConfig& cfg, const InputData& data, Diagnostics* diag) {
  const auto points = read_point_estimates(cfg.out / "estimates.csv", cfg.variant());
  SimulationRun run;
  const Date from = *cfg.from;
  const Date to = *cfg.to;
  for (Date d = from; d <= to; ++d) {
    auto it = points.find(d);
    if (it == points.end()) {
      throw Error(ErrorCode::MissingEstimates, fmt::format("no {} estimate for {}", cfg.variant().name(), d));
    }
    EpidemicParams p;
    p.latent_period = cfg.latent_period;
    p.infectious_period = cfg.infectious_period;
    p.tested_fraction = tested_fraction(data.cases, data.prevalence, d, cfg.infectious_period, diag);
    p.beta_loc = it->second.beta_loc;
    p.beta_mob = it->second.beta_mob;
    run.params.push_back(p);
    run.mobility.push_back(data.mobility_on(d, true));
  }
  SimulationConfig config;
  config.horizon = run.params.size();
  config.params = run.params;
  config.mobility = run.mobility;
  config.reinit_dates = first_days_of_month(from, to);
  const RegionalState initial = initialize_state(data.cases, data.prevalence, data.regions, from,
                                                 cfg.latent_period, cfg.infectious_period, diag);
  run.trajectory = simulate(initial, config, [&](Date d) {
    return initialize_state(data.cases, data.prevalence, data.regions, d, cfg.latent_period, cfg.infectious_period,
                            diag);
  });
  return run;
}

}  // namespace detail

/// trajectory.csv and national.csv over the window.
inline void run_simulate(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  const auto run = detail::simulate_estimated(cfg, data, diag);
  auto traj = open_output(cfg.out / "trajectory.csv");
  traj << "date,region_id,S,E,I_T,I_U,R_T,R_U,new_reported\n";
  auto national = open_output(cfg.out / "national.csv");
  national << "date,total_new_reported,R_eff\n";
  for (std::size_t k = 0; k < run.params.size(); ++k) {
    const RegionalState& s = run.trajectory.states[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Compartments& c = s.regions[i];
      traj << fmt::format("{},{},{},{},{},{},{},{},{}\n", s.date, data.regions.leaf(i).id,
                          csv::number(c.susceptible), csv::number(c.exposed), csv::number(c.infectious_tested),
                          csv::number(c.infectious_untested), csv::number(c.recovered_tested),
                          csv::number(c.recovered_untested), csv::number(run.trajectory.new_reported[k][i]));
    }
    const double r_eff =
        effective_reproduction_number(next_generation_matrix(s, run.params[k], run.mobility[k]));
    national << fmt::format("{},{},{}\n", s.date, csv::number(run.trajectory.total_reported(k)),
                            csv::number(r_eff));
  }
}

/// forecast.csv for every issue date in the window.
inline void run_forecast(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  const EstimateHistory history =
      read_history(cfg.out / "estimates.csv", cfg.out / "replicas.csv", cfg.variant());
  ForecastSettings settings{cfg.latent_period, cfg.infectious_period, cfg.variant()};
  const auto days = static_cast<std::size_t>(*cfg.to - *cfg.from + 1);
  std::vector<std::optional<Forecast>> slots(days);
  std::vector<Diagnostics> notes(days);
  parallel_for(days, [&](std::size_t k) {
    const Date issue = *cfg.from + static_cast<long>(k);
    try {
      slots[k] = make_forecast(data.cases, data.prevalence, data.regions,
                               [&](Date d) { return data.mobility_on(d, true); }, history, issue, settings,
                               &notes[k]);
    } catch (const Error& e) {
      notes[k].warn(fmt::format("{}: forecast skipped: {}: {}", issue, to_string(e.code()), e.what()));
    }
  });
  auto out = open_output(cfg.out / "forecast.csv");
  write_forecast_header(out);
  for (std::size_t k = 0; k < days; ++k) {
    if (diag) diag->merge(notes[k]);
    if (slots[k]) write_forecast_rows(out, *slots[k], data.regions);
  }
}

/// metrics.csv: RMSE and Spearman of each forecast in forecast.csv against
/// the realized cases.
inline void run_eval(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  const auto forecasts = read_forecasts(cfg.out / "forecast.csv", data.regions);
  auto out = open_output(cfg.out / "metrics.csv");
  out << "issue_date,model,rmse,spearman\n";
  for (const Forecast& f : forecasts) {
    if (!data.cases.covers(f.issue_date + (kForecastReportedDays - 1))) {
      detail::warn(diag, fmt::format("{}: realized cases not yet available, not evaluated", f.issue_date));
      continue;
    }
    const EvaluationReport r = evaluate(f, reported_totals(data.cases, f.issue_date));
    out << fmt::format("{},{},{},{}\n", f.issue_date, cfg.variant().name(), csv::number(r.rmse),
                       csv::number(r.spearman));
  }
}

/// compare.csv: paired metrics of two forecast files.
inline void run_compare(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  if (cfg.forecast_with.empty() || cfg.forecast_without.empty()) {
    throw Error(ErrorCode::ConfigError, "'forecast_with' and 'forecast_without' are required for compare");
  }
  const InputData data = load_inputs(cfg, diag);
  const auto with = read_forecasts(cfg.forecast_with, data.regions);
  const auto without = read_forecasts(cfg.forecast_without, data.regions);
  std::vector<Forecast> a;
  std::vector<Forecast> b;
  for (std::size_t k = 0; k < std::min(with.size(), without.size()); ++k) {
    if (data.cases.covers(with[k].issue_date + (kForecastReportedDays - 1))) {
      a.push_back(with[k]);
      b.push_back(without[k]);
    }
  }
  if (with.size() != without.size()) {
    throw Error(ErrorCode::MismatchedDates, "forecast files cover different issue dates");
  }
  const auto rows = compare_models(a, b, [&](Date d) { return reported_totals(data.cases, d); });
  auto out = open_output(cfg.out / "compare.csv");
  out << "issue_date,rmse_with,rmse_without,rmse_diff,spearman_with,spearman_without,spearman_diff\n";
  for (const ForecastComparison& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.issue_date, csv::number(r.with_mobility.rmse),
                       csv::number(r.without_mobility.rmse), csv::number(r.rmse_difference()),
                       csv::number(r.with_mobility.spearman), csv::number(r.without_mobility.spearman),
                       csv::number(r.spearman_difference()));
  }
}

/// validation.csv (reported, init, simulation and r_eff series) and
/// delay.csv (R_eff against `reference` if configured, otherwise the
/// initialization series against reported cases).
inline void run_validate(const RunConfig& cfg, Diagnostics* diag = nullptr) {
  cfg.validate();
  const InputData data = load_inputs(cfg, diag);
  const Date from = *cfg.from;
  const Date to = *cfg.to;
  const auto init = national_validation_init(
      data.cases, cfg.latent_period,
      [&](Date d) { return tested_fraction(data.cases, data.prevalence, d, cfg.infectious_period, diag); }, from,
      to);
  const auto run = detail::simulate_estimated(cfg, data, diag);
  std::vector<double> reported;
  std::vector<double> r_eff;
  for (std::size_t k = 0; k < run.params.size(); ++k) {
    reported.push_back(static_cast<double>(data.cases.total_on(from + static_cast<long>(k))));
    r_eff.push_back(effective_reproduction_number(
        next_generation_matrix(run.trajectory.states[k], run.params[k], run.mobility[k])));
  }
  auto out = open_output(cfg.out / "validation.csv");
  out << "date,method,value\n";
  for (std::size_t k = 0; k < run.params.size(); ++k) {
    const Date d = from + static_cast<long>(k);
    out << fmt::format("{},reported,{}\n", d, csv::number(reported[k]));
    out << fmt::format("{},init,{}\n", d, csv::number(init[k]));
    out << fmt::format("{},simulation,{}\n", d, csv::number(run.trajectory.total_reported(k)));
    out << fmt::format("{},r_eff,{}\n", d, csv::number(r_eff[k]));
  }

  DelayScan scan;
  if (!cfg.reference.empty()) {
    const csv::Table t = csv::read(cfg.reference, {"date", "value"});
    std::map<Date, double> ref;
    for (const csv::Row& row : t.rows) ref[Date::parse(row.fields[0])] = csv::to_double(t, row, 1);
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t k = 0; k < r_eff.size(); ++k) {
      auto it = ref.find(from + static_cast<long>(k));
      if (it == ref.end()) {
        throw Error(ErrorCode::DateOutsideCoverage,
                    fmt::format("reference series has no value for {}", from + static_cast<long>(k)));
      }
      a.push_back(it->second);
      b.push_back(r_eff[k]);
    }
    scan = delay_scan(a, b, cfg.max_shift);
  } else {
    scan = delay_scan(init, reported, cfg.max_shift);
  }
  auto delay = open_output(cfg.out / "delay.csv");
  delay << "shift,correlation\n";
  for (std::size_t s = 0; s < scan.correlation.size(); ++s) {
    delay << fmt::format("{},{}\n", s, csv::number(scan.correlation[s]));
  }
  detail::warn(diag, fmt::format("delay scan: best shift {} days, correlation {}", scan.best_shift,
                                 csv::number(scan.best_correlation)));
}

}  // namespace metaseir

#endif  // METASEIR_COMMANDS_HPP
