#ifndef METASEIR_TESTS_SYNTHETIC_HPP
#define METASEIR_TESTS_SYNTHETIC_HPP

// Random states, mobility and count data for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "metaseir/dynamics.hpp"
#include "metaseir/estimation.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/state_init.hpp"

namespace synth {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline metaseir::MobilityMatrix random_mobility(Rng& rng, std::size_t n, double lo = 0.0, double hi = 5000.0) {
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = i == j ? 0.0 : uniform(rng, lo, hi);
  }
  return metaseir::MobilityMatrix(m);
}

/// Compartments drawn as random shares of a random population; some regions
/// get exact zeros to exercise the caps.
inline metaseir::RegionalState random_state(Rng& rng, std::size_t n, metaseir::Date date = {2020, 3, 1}) {
  metaseir::RegionalState s;
  s.date = date;
  for (std::size_t i = 0; i < n; ++i) {
    const double pop = std::floor(uniform(rng, 1e3, 1e6));
    std::array<double, 6> w{};
    double sum = 0.0;
    for (double& v : w) {
      v = uniform(rng, 0.0, 1.0);
      if (uniform(rng, 0.0, 1.0) < 0.1) v = 0.0;
      sum += v;
    }
    if (sum == 0.0) {
      w[0] = 1.0;
      sum = 1.0;
    }
    w[0] += 2.0 * sum;  // mostly susceptible
    sum *= 3.0;
    metaseir::Compartments c;
    c.exposed = pop * w[1] / sum;
    c.infectious_tested = pop * w[2] / sum;
    c.infectious_untested = pop * w[3] / sum;
    c.recovered_tested = pop * w[4] / sum;
    c.recovered_untested = pop * w[5] / sum;
    c.susceptible = pop - (c.exposed + c.infectious_tested + c.infectious_untested + c.recovered_tested +
                           c.recovered_untested);
    s.population.push_back(pop);
    s.regions.push_back(c);
  }
  return s;
}

inline metaseir::EpidemicParams random_params(Rng& rng) {
  metaseir::EpidemicParams p;
  p.latent_period = uniform(rng, 1.0, 6.0);
  p.infectious_period = uniform(rng, 1.0, 14.0);
  p.tested_fraction = uniform(rng, 0.05, 1.0);
  p.beta_loc = uniform(rng, 0.0, 3.0);
  p.beta_mob = uniform(rng, 0.0, 3.0);
  return p;
}

inline std::int64_t draw(Rng& rng, double mean, double dispersion) {
  if (!(mean > 0.0)) return 0;
  double rate = mean;
  if (std::isfinite(dispersion)) rate = std::gamma_distribution<double>(dispersion, mean / dispersion)(rng);
  return std::poisson_distribution<std::int64_t>(rate)(rng);
}

struct DesignSpec {
  std::size_t regions = 355;
  double beta_loc = 0.3;
  double beta_mob = 0.1;
  double dispersion = 10.0;
  double mobility_scale = 30.0;
};

/// x_loc and x_mob of `state` under `mobility`; counts left empty.
inline metaseir::Covariates design(const metaseir::RegionalState& state, const metaseir::MobilityMatrix& mobility) {
  const Eigen::VectorXd pressure = metaseir::mobility_pressure(state, mobility.symmetric());
  metaseir::Covariates cov;
  cov.date = state.date;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& c = state.regions[i];
    const double share = c.susceptible / state.population[i];
    cov.x_loc.push_back(share * c.infectious());
    cov.x_mob.push_back(share * pressure(static_cast<Eigen::Index>(i)));
  }
  return cov;
}

struct Day {
  metaseir::RegionalState state;
  metaseir::MobilityMatrix mobility;
  metaseir::Covariates cov;
};

/// One day of data: a random state and gravity-like mobility matrix, with
/// counts drawn from the negative binomial (Poisson for infinite
/// dispersion) around β_loc·x_loc + β_mob·x_mob.
inline Day nb_day(Rng& rng, const DesignSpec& spec, metaseir::Date date = {2020, 3, 1}) {
  Day day;
  day.state.date = date;
  for (std::size_t i = 0; i < spec.regions; ++i) {
    const double pop = std::floor(uniform(rng, 5e3, 2e5));
    metaseir::Compartments c;
    const double prevalence = uniform(rng, 0.0005, 0.01);
    c.infectious_tested = pop * prevalence * 0.3;
    c.infectious_untested = pop * prevalence * 0.7;
    c.exposed = pop * prevalence * 0.4;
    c.recovered_tested = pop * 0.01;
    c.recovered_untested = pop * 0.02;
    c.susceptible = pop - (c.exposed + c.infectious() + c.recovered_tested + c.recovered_untested);
    day.state.population.push_back(pop);
    day.state.regions.push_back(c);
  }
  std::vector<double> activity(spec.regions);
  for (double& a : activity) a = std::exp(uniform(rng, -1.5, 1.5));
  Eigen::MatrixXd volume(spec.regions, spec.regions);
  for (std::size_t i = 0; i < spec.regions; ++i) {
    for (std::size_t j = 0; j < spec.regions; ++j) {
      volume(i, j) = i == j ? 0.0 : spec.mobility_scale * activity[i] * activity[j] * uniform(rng, 0.0, 1.0);
    }
  }
  day.mobility = metaseir::MobilityMatrix(volume);
  day.cov = design(day.state, day.mobility);
  for (std::size_t i = 0; i < spec.regions; ++i) {
    day.cov.y.push_back(
        draw(rng, spec.beta_loc * day.cov.x_loc[i] + spec.beta_mob * day.cov.x_mob[i], spec.dispersion));
  }
  return day;
}

}  // namespace synth

#endif  // METASEIR_TESTS_SYNTHETIC_HPP
