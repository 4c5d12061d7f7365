#ifndef METASEIR_DYNAMICS_HPP
#define METASEIR_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "metaseir/error.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/state_init.hpp"

namespace metaseir {

/// Per-region mobility exposure Σ_j (I_j^U / N_j)(M_ji + M_ij). Tested
/// infectious persons do not travel, so only untested ones contribute.
inline Eigen::VectorXd mobility_pressure(const RegionalState& state, const Eigen::MatrixXd& symmetric_volume) {
  const auto n = static_cast<Eigen::Index>(state.size());
  Eigen::VectorXd untested_share(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    untested_share(j) = state.regions[j].infectious_untested / state.population[j];
  }
  return symmetric_volume * untested_share;
}

struct StepResult {
  RegionalState next;
  std::vector<double> new_exposures;
  std::vector<double> new_reported;
};

/// One forward-Euler day. Each outflow is capped at its source, and the
/// E outflow keeps its a : (1-a) split when capped, so compartments stay
/// nonnegative and each region's total is preserved.
inline StepResult advance(const RegionalState& state, const EpidemicParams& params, const MobilityMatrix& mobility) {
  params.validate();
  const std::size_t n = state.size();
  if (mobility.size() != n || state.population.size() != n) {
    throw Error(ErrorCode::MismatchedRegions, "state and mobility matrix differ in region count");
  }
  Eigen::VectorXd pressure = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (params.beta_mob > 0.0) pressure = mobility_pressure(state, mobility.symmetric());

  StepResult out;
  out.next.date = state.date + 1;
  out.next.population = state.population;
  out.next.regions.resize(n);
  out.new_exposures.resize(n);
  out.new_reported.resize(n);
  const double a = params.tested_fraction;
  for (std::size_t i = 0; i < n; ++i) {
    const Compartments& c = state.regions[i];
    const double susceptible_share = c.susceptible / state.population[i];
    const double force = params.beta_loc * susceptible_share * c.infectious() +
                         params.beta_mob * susceptible_share * pressure(static_cast<Eigen::Index>(i));
    const double infections = std::min(force, c.susceptible);
    const double onset = std::min(c.exposed / params.latent_period, c.exposed);
    const double to_tested = a * onset;
    const double to_untested = onset - to_tested;
    const double recover_tested = std::min(c.infectious_tested / params.infectious_period, c.infectious_tested);
    const double recover_untested =
        std::min(c.infectious_untested / params.infectious_period, c.infectious_untested);

    Compartments& x = out.next.regions[i];
    x.susceptible = c.susceptible - infections;
    x.exposed = c.exposed + infections - onset;
    x.infectious_tested = c.infectious_tested + to_tested - recover_tested;
    x.infectious_untested = c.infectious_untested + to_untested - recover_untested;
    x.recovered_tested = c.recovered_tested + recover_tested;
    x.recovered_untested = c.recovered_untested + recover_untested;
    out.new_exposures[i] = infections;
    out.new_reported[i] = to_tested;
  }
  return out;
}

inline RegionalState step(const RegionalState& state, const EpidemicParams& params, const MobilityMatrix& mobility) {
  return advance(state, params, mobility).next;
}

/// Replaces the simulated state on a re-initialization date.
using Reinitializer = std::function<RegionalState(Date)>;

struct SimulationConfig {
  std::size_t horizon = 1;
  /// One entry per simulated day, or a single entry used for every day.
  std::vector<EpidemicParams> params;
  /// Same convention as `params`.
  std::vector<MobilityMatrix> mobility;
  std::set<Date> reinit_dates;

  const EpidemicParams& params_for(std::size_t day) const { return params.size() == 1 ? params[0] : params[day]; }
  const MobilityMatrix& mobility_for(std::size_t day) const {
    return mobility.size() == 1 ? mobility[0] : mobility[day];
  }

  void validate() const {
    if (horizon < 1) throw Error(ErrorCode::InvalidParameter, "horizon must be at least one day");
    auto covers = [&](std::size_t size) { return size == 1 || size == horizon; };
    if (!covers(params.size()) || !covers(mobility.size())) {
      throw Error(ErrorCode::InvalidParameter, "params and mobility must cover every simulated day");
    }
  }
};

struct Trajectory {
  /// horizon + 1 states on consecutive dates.
  std::vector<RegionalState> states;
  /// new_exposures[k][i], new_reported[k][i]: flows out of states[k].
  std::vector<std::vector<double>> new_exposures;
  std::vector<std::vector<double>> new_reported;

  double total_reported(std::size_t day) const {
    double total = 0.0;
    for (double v : new_reported[day]) total += v;
    return total;
  }
};

inline Trajectory simulate(const RegionalState& initial, const SimulationConfig& config,
                           const Reinitializer& reinit = {}) {
  config.validate();
  if (!config.reinit_dates.empty() && !reinit) {
    throw Error(ErrorCode::InvalidParameter, "re-initialization dates given without case data");
  }
  Trajectory traj;
  traj.states.reserve(config.horizon + 1);
  traj.states.push_back(initial);
  for (std::size_t k = 0; k < config.horizon; ++k) {
    StepResult r = advance(traj.states.back(), config.params_for(k), config.mobility_for(k));
    traj.new_exposures.push_back(std::move(r.new_exposures));
    traj.new_reported.push_back(std::move(r.new_reported));
    if (config.reinit_dates.contains(r.next.date)) {
      traj.states.push_back(reinit(r.next.date));
    } else {
      traj.states.push_back(std::move(r.next));
    }
  }
  return traj;
}

/// K_ij: expected infections in region i caused by one newly exposed person
/// of region j over its infectious period. A share a tests positive and only
/// transmits locally; the rest also transmits through travel in both
/// directions.
inline Eigen::MatrixXd next_generation_matrix(const RegionalState& state, const EpidemicParams& params,
                                              const MobilityMatrix& mobility) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(state.size());
  if (static_cast<Eigen::Index>(mobility.size()) != n) {
    throw Error(ErrorCode::MismatchedRegions, "state and mobility matrix differ in region count");
  }
  const Eigen::MatrixXd contact = mobility.symmetric();
  const double omega = params.infectious_period;
  const double untested = 1.0 - params.tested_fraction;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double share_i = state.regions[i].susceptible / state.population[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = untested * params.beta_mob * share_i * contact(i, j) / state.population[j];
      if (i == j) v += params.beta_loc * share_i;
      k(i, j) = omega * v;
    }
  }
  return k;
}

struct PowerIterationOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
};

/// Spectral radius of a nonnegative square matrix by power iteration on
/// K + cI, c = a quarter of the largest row sum. The shift makes the
/// Perron root strictly dominant even for periodic K and keeps the iterate
/// positive, so min and max of (Kx)_i / x_i bracket the root. Iteration
/// stops when the bracket closes or, for reducible K where it need not,
/// when the geometric tail of the remaining updates is below tolerance.
inline double spectral_radius(const Eigen::MatrixXd& k, const PowerIterationOptions& opts = {}) {
  if (k.rows() != k.cols() || k.rows() == 0) {
    throw Error(ErrorCode::InvalidParameter, "spectral radius needs a nonempty square matrix");
  }
  if ((k.array() < 0.0).any() || !k.allFinite()) {
    throw Error(ErrorCode::InvalidParameter, "spectral radius needs a finite nonnegative matrix");
  }
  if (k.rows() == 1) return k(0, 0);
  const double bound = k.rowwise().sum().maxCoeff();
  if (bound == 0.0) return 0.0;
  const double shift = 0.25 * bound;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(k.rows()).normalized();
  double previous = -1.0;
  double previous_step = -1.0;
  double previous_rate = -1.0;
  int steady = 0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    Eigen::VectorXd y = k * x + shift * x;
    const Eigen::ArrayXd live = (x.array() > 0.0).cast<double>();
    const Eigen::ArrayXd ratio = y.array() / x.array().max(std::numeric_limits<double>::min());
    const double lo = (live > 0.0).select(ratio, std::numeric_limits<double>::infinity()).minCoeff();
    const double hi = (live > 0.0).select(ratio, 0.0).maxCoeff();
    const double scale = std::max(1.0, hi);
    if (hi - lo <= opts.tolerance * scale) return std::max(0.0, 0.5 * (lo + hi) - shift);
    const double estimate = y.norm();
    x = y / estimate;
    const double change = std::abs(estimate - previous);
    // geometric tail, trusted only once the contraction rate has settled
    if (previous_step > 0.0 && change < previous_step) {
      const double rate = change / previous_step;
      steady = std::abs(rate - previous_rate) <= 1e-3 * (1.0 - rate) ? steady + 1 : 0;
      previous_rate = rate;
      if (steady >= 3 && change * rate / (1.0 - rate) <= 0.01 * opts.tolerance * scale) {
        return std::max(0.0, estimate - shift);
      }
    } else {
      steady = 0;
      previous_rate = -1.0;
    }
    if (change == 0.0 && it > 0) return std::max(0.0, estimate - shift);
    previous_step = change;
    previous = estimate;
  }
  throw Error(ErrorCode::NonConvergence,
              fmt::format("power iteration did not converge in {} iterations", opts.max_iterations));
}

inline double effective_reproduction_number(const Eigen::MatrixXd& k, const PowerIterationOptions& opts = {}) {
  return spectral_radius(k, opts);
}

}  // namespace metaseir

#endif  // METASEIR_DYNAMICS_HPP
