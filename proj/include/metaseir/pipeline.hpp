#ifndef METASEIR_PIPELINE_HPP
#define METASEIR_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metaseir/csv.hpp"
#include "metaseir/date.hpp"
#include "metaseir/dynamics.hpp"
#include "metaseir/error.hpp"
#include "metaseir/estimation.hpp"
#include "metaseir/forecast.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/parallel.hpp"
#include "metaseir/state_init.hpp"

namespace metaseir {

/// All raw inputs, validated.
struct InputData {
  RegionTable regions;
  CaseSeries cases;
  MobilityMatrix baseline;
  MobilityReductionSeries reductions;
  PrevalenceSeries prevalence;

  /// Effective mobility on `date`. Past the last reduction date the last
  /// observed factors are carried forward when `carry_forward` is set.
  MobilityMatrix mobility_on(Date date, bool carry_forward = false) const {
    if (carry_forward && !reductions.covers(date)) {
      auto last = reductions.last_national_date();
      if (last && date > *last) return effective_mobility(baseline, reductions, regions, *last);
    }
    return effective_mobility(baseline, reductions, regions, date);
  }
};

struct EstimationSettings {
  double latent_period = 3.0;
  double infectious_period = 9.0;
  CountModel family = CountModel::negbin;
  bool include_mobility_variant = true;
  std::size_t bootstrap_replicas = 100;
  std::uint64_t seed = 0;
  FitOptions fit;

  std::vector<ModelVariant> variants() const {
    std::vector<ModelVariant> out;
    if (include_mobility_variant) out.push_back({family, true});
    out.push_back({family, false});
    return out;
  }
};

/// Covariates of day t from the initialized states on t and t + 1.
inline Covariates covariates_on(const InputData& data, Date date, const EstimationSettings& settings,
                                double* tested_fraction_out = nullptr, Diagnostics* diag = nullptr) {
  const RegionalState today = initialize_state(data.cases, data.prevalence, data.regions, date,
                                               settings.latent_period, settings.infectious_period, diag);
  const RegionalState tomorrow = initialize_state(data.cases, data.prevalence, data.regions, date + 1,
                                                  settings.latent_period, settings.infectious_period, diag);
  if (tested_fraction_out) {
    *tested_fraction_out = tested_fraction(data.cases, data.prevalence, date, settings.infectious_period);
  }
  return build_covariates(today, tomorrow, data.mobility_on(date));
}

/// Point estimates, bootstrap intervals and derived parameters for one day,
/// one record per variant.
inline std::vector<EstimateRecord> estimate_day(const InputData& data, Date date,
                                                const EstimationSettings& settings, Diagnostics* diag = nullptr) {
  double a = 0.0;
  const Covariates cov = covariates_on(data, date, settings, &a, diag);
  const double total_mobility = data.mobility_on(date).total();
  const double population = data.regions.total_population();
  BootstrapOptions boot;
  boot.replicas = settings.bootstrap_replicas;
  boot.seed = settings.seed;
  boot.fit = settings.fit;
  std::vector<EstimateRecord> out;
  for (ModelVariant v : settings.variants()) {
    EstimateRecord rec = bootstrap(fit(cov, v, settings.fit), cov, boot, diag);
    attach_derived(rec, total_mobility, population, diag);
    rec.tested_fraction = a;
    out.push_back(std::move(rec));
  }
  return out;
}

/// Runs estimate_day over [from, to]. Days that fail are skipped with a
/// warning. Output order is by date, then variant.
inline std::vector<EstimateRecord> estimate_window(const InputData& data, Date from, Date to,
                                                   const EstimationSettings& settings, Diagnostics* diag = nullptr) {
  const auto days = static_cast<std::size_t>(std::max<long>(0, to - from + 1));
  std::vector<std::vector<EstimateRecord>> slots(days);
  std::vector<Diagnostics> notes(days);
  parallel_for(days, [&](std::size_t k) {
    const Date d = from + static_cast<long>(k);
    try {
      slots[k] = estimate_day(data, d, settings, &notes[k]);
    } catch (const Error& e) {
      notes[k].warn(fmt::format("{}: estimation skipped: {}: {}", d, to_string(e.code()), e.what()));
    }
  });
  std::vector<EstimateRecord> out;
  for (std::size_t k = 0; k < days; ++k) {
    if (diag) diag->merge(notes[k]);
    for (auto& r : slots[k]) out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline void write_state_header(std::ostream& out) { out << "date,region_id,S,E,I_T,I_U,R_T,R_U\n"; }

inline void write_state_rows(std::ostream& out, const RegionalState& state, const RegionTable& regions) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Compartments& c = state.regions[i];
    out << fmt::format("{},{},{},{},{},{},{},{}\n", state.date, regions.leaf(i).id, csv::number(c.susceptible),
                       csv::number(c.exposed), csv::number(c.infectious_tested),
                       csv::number(c.infectious_untested), csv::number(c.recovered_tested),
                       csv::number(c.recovered_untested));
  }
}

inline void write_estimates(std::ostream& out, const std::vector<EstimateRecord>& records) {
  out << "date,model,beta_loc,beta_mob,r,loglik,aic,beta_loc_lo,beta_loc_hi,beta_mob_lo,beta_mob_hi,p_local,eps_c\n";
  for (const EstimateRecord& r : records) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.date, r.model.name(), csv::number(r.beta_loc),
                       csv::number(r.beta_mob), csv::number(r.dispersion), csv::number(r.loglik),
                       csv::number(r.aic), csv::number(r.ci_beta_loc.lo), csv::number(r.ci_beta_loc.hi),
                       csv::number(r.ci_beta_mob.lo), csv::number(r.ci_beta_mob.hi), csv::number(r.p_local),
                       csv::number(r.eps_c));
  }
}

inline void write_replicas(std::ostream& out, const std::vector<EstimateRecord>& records) {
  out << "date,model,replica,beta_loc,beta_mob,r,tested_fraction\n";
  for (const EstimateRecord& r : records) {
    for (std::size_t b = 0; b < r.replicas.size(); ++b) {
      const Replica& x = r.replicas[b];
      out << fmt::format("{},{},{},{},{},{},{}\n", r.date, r.model.name(), b, csv::number(x.beta_loc),
                         csv::number(x.beta_mob), csv::number(x.dispersion), csv::number(r.tested_fraction));
    }
  }
}

struct PointEstimate {
  double beta_loc = 0.0;
  double beta_mob = 0.0;
  double dispersion = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
};

/// estimates.csv rows of one variant, keyed by date.
inline std::map<Date, PointEstimate> read_point_estimates(const std::filesystem::path& path, ModelVariant variant) {
  const csv::Table t =
      csv::read(path, {"date", "model", "beta_loc", "beta_mob", "r", "loglik", "aic", "beta_loc_lo", "beta_loc_hi",
                       "beta_mob_lo", "beta_mob_hi", "p_local", "eps_c"});
  std::map<Date, PointEstimate> out;
  for (const csv::Row& row : t.rows) {
    if (ModelVariant::parse(row.fields[1]) != variant) continue;
    out[Date::parse(row.fields[0])] = {csv::to_double(t, row, 2), csv::to_double(t, row, 3),
                                       csv::to_double(t, row, 4), csv::to_double(t, row, 5),
                                       csv::to_double(t, row, 6)};
  }
  return out;
}

/// Joins estimates.csv and replicas.csv of one variant for forecasting.
inline EstimateHistory read_history(const std::filesystem::path& estimates, const std::filesystem::path& replicas,
                                    ModelVariant variant) {
  EstimateHistory history;
  for (const auto& [date, p] : read_point_estimates(estimates, variant)) {
    history[date].beta_loc = p.beta_loc;
    history[date].beta_mob = p.beta_mob;
  }
  const csv::Table t = csv::read(replicas, {"date", "model", "replica", "beta_loc", "beta_mob", "r", "tested_fraction"});
  for (const csv::Row& row : t.rows) {
    if (ModelVariant::parse(row.fields[1]) != variant) continue;
    auto it = history.find(Date::parse(row.fields[0]));
    if (it == history.end()) continue;
    it->second.tested_fraction = csv::to_double(t, row, 6);
    it->second.replicas.push_back({csv::to_double(t, row, 3), csv::to_double(t, row, 4)});
  }
  return history;
}

inline void write_forecast_header(std::ostream& out) { out << "issue_date,region_id,point,lo95,hi95,fraction\n"; }

inline void write_forecast_rows(std::ostream& out, const Forecast& f, const RegionTable& regions) {
  for (std::size_t i = 0; i < f.point.size(); ++i) {
    out << fmt::format("{},{},{},{},{},{}\n", f.issue_date, regions.leaf(i).id, csv::number(f.point[i]),
                       csv::number(f.lo95[i]), csv::number(f.hi95[i]),
                       f.fractions[i] ? csv::number(*f.fractions[i]) : std::string());
  }
}

/// Reads forecast.csv back into forecasts ordered by issue date. Scenario
/// matrices are not stored in the file and come back empty.
inline std::vector<Forecast> read_forecasts(const std::filesystem::path& path, const RegionTable& regions) {
  const csv::Table t = csv::read(path, {"issue_date", "region_id", "point", "lo95", "hi95", "fraction"});
  std::map<Date, Forecast> by_date;
  for (const csv::Row& row : t.rows) {
    const Date d = Date::parse(row.fields[0]);
    Forecast& f = by_date[d];
    if (f.point.empty()) {
      f.issue_date = d;
      f.point.assign(regions.size(), 0.0);
      f.lo95.assign(regions.size(), 0.0);
      f.hi95.assign(regions.size(), 0.0);
      f.fractions.assign(regions.size(), std::nullopt);
    }
    const std::size_t i = regions.require_index(row.fields[1]);
    f.point[i] = csv::to_double(t, row, 2);
    f.lo95[i] = csv::to_double(t, row, 3);
    f.hi95[i] = csv::to_double(t, row, 4);
    if (!row.fields[5].empty()) f.fractions[i] = csv::to_double(t, row, 5);
  }
  std::vector<Forecast> out;
  for (auto& [d, f] : by_date) {
    for (double v : f.point) f.national_total += v;
    out.push_back(std::move(f));
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace metaseir

#endif  // METASEIR_PIPELINE_HPP
