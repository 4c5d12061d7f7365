#ifndef METASEIR_ESTIMATION_HPP
#define METASEIR_ESTIMATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "metaseir/date.hpp"
#include "metaseir/dynamics.hpp"
#include "metaseir/error.hpp"
#include "metaseir/ingest.hpp"
#include "metaseir/state_init.hpp"

namespace metaseir {

enum class CountModel { poisson, negbin };

struct ModelVariant {
  CountModel family = CountModel::negbin;
  bool with_mobility = true;

  std::string name() const {
    return fmt::format("{}_{}", family == CountModel::poisson ? "poisson" : "negbin",
                       with_mobility ? "mob" : "nomob");
  }

  static ModelVariant parse(std::string_view text) {
    for (CountModel f : {CountModel::poisson, CountModel::negbin}) {
      for (bool m : {true, false}) {
        ModelVariant v{f, m};
        if (v.name() == text) return v;
      }
    }
    throw Error(ErrorCode::ParseError, fmt::format("unknown model variant '{}'", text));
  }

  bool operator==(const ModelVariant&) const = default;
};

/// Number of free parameters k in the AIC.
inline int parameter_count(ModelVariant v) {
  return (v.family == CountModel::negbin ? 2 : 1) + (v.with_mobility ? 1 : 0);
}

/// Regression inputs for one day: the rate of region i is
/// β_loc·x_loc[i] + β_mob·x_mob[i] and y[i] is the observed count.
struct Covariates {
  Date date;
  std::vector<double> x_loc;
  std::vector<double> x_mob;
  std::vector<std::int64_t> y;

  std::size_t size() const noexcept { return y.size(); }

  /// FNV-1a over the raw bytes of all three columns.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* data, std::size_t bytes) {
      const auto* p = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
      }
    };
    mix(x_loc.data(), x_loc.size() * sizeof(double));
    mix(x_mob.data(), x_mob.size() * sizeof(double));
    mix(y.data(), y.size() * sizeof(std::int64_t));
    return h;
  }
};

inline Covariates build_covariates(const RegionalState& today, const RegionalState& tomorrow,
                                   const MobilityMatrix& mobility) {
  if (tomorrow.date != today.date + 1) {
    throw Error(ErrorCode::MismatchedDates,
                fmt::format("covariates need consecutive states, got {} and {}", today.date, tomorrow.date));
  }
  const std::size_t n = today.size();
  if (tomorrow.size() != n || mobility.size() != n) {
    throw Error(ErrorCode::MismatchedRegions, "states and mobility matrix differ in region count");
  }
  const Eigen::VectorXd pressure = mobility_pressure(today, mobility.symmetric());
  Covariates cov;
  cov.date = today.date;
  cov.x_loc.resize(n);
  cov.x_mob.resize(n);
  cov.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Compartments& c = today.regions[i];
    const double share = c.susceptible / today.population[i];
    cov.x_loc[i] = share * c.infectious();
    cov.x_mob[i] = share * pressure(static_cast<Eigen::Index>(i));
    const double drop = c.susceptible - tomorrow.regions[i].susceptible;
    cov.y[i] = static_cast<std::int64_t>(std::llround(std::max(0.0, drop)));
  }
  return cov;
}

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline void require_rates(double beta_loc, double beta_mob) {
  if (!(beta_loc >= 0.0) || !(beta_mob >= 0.0) || !std::isfinite(beta_loc) || !std::isfinite(beta_mob)) {
    throw Error(ErrorCode::InvalidParameter, "transmission rates must be finite and nonnegative");
  }
}

/// log Γ(r + y) - log Γ(r).
inline double log_rising(double r, std::int64_t y) {
  if (y < 64) {
    double sum = 0.0;
    for (std::int64_t k = 0; k < y; ++k) sum += std::log(r + static_cast<double>(k));
    return sum;
  }
  return std::lgamma(r + static_cast<double>(y)) - std::lgamma(r);
}

inline double poisson_term(std::int64_t y, double rate) {
  if (y == 0) return -rate;
  if (rate <= 0.0) return kNegInf;
  return static_cast<double>(y) * std::log(rate) - rate - std::lgamma(static_cast<double>(y) + 1.0);
}

inline double negbin_term(std::int64_t y, double rate, double r) {
  const double tail = -r * std::log1p(rate / r);
  if (y == 0) return tail;
  if (rate <= 0.0) return kNegInf;
  const double yd = static_cast<double>(y);
  return log_rising(r, y) - std::lgamma(yd + 1.0) + yd * (std::log(rate) - std::log(r + rate)) + tail;
}

}  // namespace detail

/// Poisson log-likelihood of all regions; −∞ when a positive count has
/// zero rate.
inline double loglik_poisson(double beta_loc, double beta_mob, const Covariates& cov) {
  detail::require_rates(beta_loc, beta_mob);
  double sum = 0.0;
  for (std::size_t i = 0; i < cov.size(); ++i) {
    sum += detail::poisson_term(cov.y[i], beta_loc * cov.x_loc[i] + beta_mob * cov.x_mob[i]);
  }
  return sum;
}

/// Negative binomial log-likelihood with mean λ_i and dispersion r
/// (variance λ(1 + λ/r)).
inline double loglik_negbin(double beta_loc, double beta_mob, double dispersion, const Covariates& cov) {
  detail::require_rates(beta_loc, beta_mob);
  if (!(dispersion > 0.0)) throw Error(ErrorCode::InvalidParameter, "dispersion must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < cov.size(); ++i) {
    sum += detail::negbin_term(cov.y[i], beta_loc * cov.x_loc[i] + beta_mob * cov.x_mob[i], dispersion);
  }
  return sum;
}

struct FitOptions {
  double dispersion_min = 1e-6;
  double dispersion_max = 1e8;
  double gradient_tolerance = 1e-8;
  double relative_tolerance = 1e-12;
  std::size_t max_iterations = 500;
  /// Bits of precision for the search over log(r).
  int dispersion_bits = 36;
};

struct Interval {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
};

struct Replica {
  double beta_loc = 0.0;
  double beta_mob = 0.0;
  double dispersion = std::numeric_limits<double>::infinity();
  double p_local = std::numeric_limits<double>::quiet_NaN();
  double eps_c = std::numeric_limits<double>::quiet_NaN();
};

struct EstimateRecord {
  Date date;
  ModelVariant model;
  double beta_loc = 0.0;
  double beta_mob = 0.0;
  /// +inf for the Poisson family.
  double dispersion = std::numeric_limits<double>::infinity();
  double loglik = 0.0;
  double aic = 0.0;
  std::uint64_t data_fingerprint = 0;
  std::size_t observations = 0;
  std::size_t iterations = 0;

  std::vector<Replica> replicas;
  std::size_t dropped_replicas = 0;
  Interval ci_beta_loc;
  Interval ci_beta_mob;
  Interval ci_dispersion;
  Interval ci_p_local;
  Interval ci_eps_c;

  double p_local = std::numeric_limits<double>::quiet_NaN();
  double eps_c = std::numeric_limits<double>::quiet_NaN();
  /// Set when β_loc = β_mob = 0 and p, εc are reported by convention.
  bool derived_degenerate = false;
  double tested_fraction = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

using Beta = std::array<double, 2>;

/// Likelihood restricted to the regions whose rate can be nonzero under
/// the variant. The others contribute 0 (count 0) or −∞ (positive count)
/// whatever the rates, so they are tallied apart.
class CountLikelihood {
 public:
  CountLikelihood(const Covariates& cov, ModelVariant variant) : variant_(variant) {
    bool any_mob = false;
    for (std::size_t i = 0; i < cov.size(); ++i) {
      const double xl = cov.x_loc[i];
      const double xm = variant.with_mobility ? cov.x_mob[i] : 0.0;
      if (!(xl >= 0.0) || !(xm >= 0.0) || !std::isfinite(xl) || !std::isfinite(xm) || cov.y[i] < 0) {
        throw Error(ErrorCode::InvalidParameter, "covariates must be finite and nonnegative");
      }
      if (xl == 0.0 && xm == 0.0) {
        if (cov.y[i] > 0) ++infeasible_;
        continue;
      }
      any_mob = any_mob || xm > 0.0;
      x_loc_.push_back(xl);
      x_mob_.push_back(xm);
      y_.push_back(cov.y[i]);
      total_y_ += static_cast<double>(cov.y[i]);
      log_factorials_ += std::lgamma(static_cast<double>(cov.y[i]) + 1.0);
    }
    if (y_.empty()) {
      throw Error(ErrorCode::DegenerateDesign, fmt::format("all covariates are zero on {}", cov.date));
    }
    free_ = {std::any_of(x_loc_.begin(), x_loc_.end(), [](double v) { return v > 0.0; }), any_mob};
    std::int64_t y_max = *std::max_element(y_.begin(), y_.end());
    above_.assign(static_cast<std::size_t>(y_max), 0.0);
    for (std::int64_t y : y_) {
      for (std::int64_t k = 0; k < y; ++k) above_[static_cast<std::size_t>(k)] += 1.0;
    }
  }

  bool poisson() const { return variant_.family == CountModel::poisson; }
  bool infeasible() const { return infeasible_ > 0; }
  std::size_t infeasible_count() const { return infeasible_; }
  double total_count() const { return total_y_; }
  const std::array<bool, 2>& free() const { return free_; }

  /// Terms that do not depend on β: Σ [log Γ(r+y) − log Γ(r) − log y!].
  double constant(double r) const {
    if (poisson()) return -log_factorials_;
    double sum = 0.0;
    if (above_.size() < 4096) {
      for (std::size_t k = 0; k < above_.size(); ++k) {
        if (above_[k] > 0.0) sum += above_[k] * std::log(r + static_cast<double>(k));
      }
    } else {
      for (std::int64_t y : y_) sum += log_rising(r, y);
    }
    return sum - log_factorials_;
  }

  /// β-dependent part; r is ignored for Poisson.
  double value(const Beta& b, double r) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const double rate = b[0] * x_loc_[i] + b[1] * x_mob_[i];
      const double y = static_cast<double>(y_[i]);
      if (y > 0.0 && rate <= 0.0) return kNegInf;
      if (poisson()) {
        sum += (y > 0.0 ? y * std::log(rate) : 0.0) - rate;
      } else {
        sum += (y > 0.0 ? y * (std::log(rate) - std::log(r + rate)) : 0.0) - r * std::log1p(rate / r);
      }
    }
    return sum;
  }

  void derivatives(const Beta& b, double r, Beta& g, Eigen::Matrix2d& h) const {
    g = {0.0, 0.0};
    h.setZero();
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const double xl = x_loc_[i];
      const double xm = x_mob_[i];
      const double rate = b[0] * xl + b[1] * xm;
      const double y = static_cast<double>(y_[i]);
      double d1 = 0.0;
      double d2 = 0.0;
      if (poisson()) {
        d1 = (y > 0.0 ? y / rate : 0.0) - 1.0;
        d2 = y > 0.0 ? -y / (rate * rate) : 0.0;
      } else {
        const double denom = r + rate;
        d1 = (y > 0.0 ? y / rate : 0.0) - (y + r) / denom;
        d2 = (y > 0.0 ? -y / (rate * rate) : 0.0) + (y + r) / (denom * denom);
      }
      g[0] += d1 * xl;
      g[1] += d1 * xm;
      h(0, 0) += d2 * xl * xl;
      h(0, 1) += d2 * xl * xm;
      h(1, 1) += d2 * xm * xm;
    }
    h(1, 0) = h(0, 1);
  }

  /// Starting point where every active region has a positive rate.
  Beta moment_start() const {
    if (total_y_ == 0.0) return {0.0, 0.0};
    double design = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      design += (free_[0] ? x_loc_[i] : 0.0) + (free_[1] ? x_mob_[i] : 0.0);
    }
    const double s = total_y_ / design;
    return {free_[0] ? s : 0.0, free_[1] ? s : 0.0};
  }

 private:
  ModelVariant variant_;
  std::vector<double> x_loc_;
  std::vector<double> x_mob_;
  std::vector<std::int64_t> y_;
  std::vector<double> above_;  // above_[k] = #{i : y_i > k}
  double total_y_ = 0.0;
  double log_factorials_ = 0.0;
  std::size_t infeasible_ = 0;
  std::array<bool, 2> free_{};
};

struct BetaFit {
  Beta beta{};
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Projected Newton ascent on β ≥ 0 for fixed r. Falls back to a scaled
/// gradient step where the Hessian is not negative definite.
inline BetaFit maximize_beta(const CountLikelihood& lik, double r, Beta start, const FitOptions& opts) {
  const auto& allowed = lik.free();
  for (int k = 0; k < 2; ++k) start[k] = allowed[k] ? std::max(0.0, start[k]) : 0.0;
  Beta b = start;
  double f = lik.value(b, r);
  if (!std::isfinite(f)) {
    b = lik.moment_start();
    f = lik.value(b, r);
  }
  if (!std::isfinite(f)) {
    throw Error(ErrorCode::NonConvergence, "no feasible starting point for the likelihood");
  }
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    Beta g{};
    Eigen::Matrix2d h;
    lik.derivatives(b, r, g, h);
    std::array<bool, 2> active{};
    double projected = 0.0;
    for (int k = 0; k < 2; ++k) {
      if (!allowed[k]) continue;
      active[k] = b[k] > 0.0 || g[k] > 0.0;
      if (active[k]) projected = std::max(projected, std::abs(g[k]));
    }
    if (projected <= opts.gradient_tolerance) return {b, f, it};

    Beta d{0.0, 0.0};
    bool newton = false;
    if (active[0] && active[1]) {
      const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
      if (h(0, 0) < 0.0 && det > 0.0) {
        d[0] = -(h(1, 1) * g[0] - h(0, 1) * g[1]) / det;
        d[1] = -(-h(1, 0) * g[0] + h(0, 0) * g[1]) / det;
        newton = d[0] * g[0] + d[1] * g[1] > 0.0;
      }
    } else {
      for (int k = 0; k < 2; ++k) {
        if (active[k] && h(k, k) < 0.0) {
          d[k] = -g[k] / h(k, k);
          newton = true;
        }
      }
    }
    if (!newton) {
      for (int k = 0; k < 2; ++k) {
        d[k] = active[k] ? g[k] / std::max(std::abs(h(k, k)), 1e-12) : 0.0;
      }
    }

    double t = 1.0;
    bool accepted = false;
    Beta candidate{};
    double fc = detail::kNegInf;
    for (int halving = 0; halving < 80; ++halving, t *= 0.5) {
      for (int k = 0; k < 2; ++k) candidate[k] = active[k] ? std::max(0.0, b[k] + t * d[k]) : b[k];
      fc = lik.value(candidate, r);
      const double predicted = g[0] * (candidate[0] - b[0]) + g[1] * (candidate[1] - b[1]);
      if (std::isfinite(fc) && fc >= f + 1e-4 * predicted) {
        accepted = true;
        break;
      }
    }
    if (!accepted || candidate == b) return {b, f, it};
    const double change = std::abs(fc - f);
    b = candidate;
    f = fc;
    if (change <= opts.relative_tolerance * std::max(1.0, std::abs(f))) {
      // Newton's step is quadratically convergent; one more polish is cheap
      // and lets the gradient test decide when possible.
      Beta g2{};
      Eigen::Matrix2d h2;
      lik.derivatives(b, r, g2, h2);
      double pg = 0.0;
      for (int k = 0; k < 2; ++k) {
        if (allowed[k] && (b[k] > 0.0 || g2[k] > 0.0)) pg = std::max(pg, std::abs(g2[k]));
      }
      if (pg <= opts.gradient_tolerance || change == 0.0) return {b, f, it + 1};
    }
  }
  throw Error(ErrorCode::NonConvergence,
              fmt::format("rate optimization did not converge in {} iterations", opts.max_iterations));
}

}  // namespace detail

/// Maximum likelihood fit of one day. β ≥ 0 is enforced; the variant
/// without mobility fixes β_mob = 0; for the negative binomial r is profiled
/// over [dispersion_min, dispersion_max] on a log scale.
inline EstimateRecord fit(const Covariates& cov, ModelVariant variant, const FitOptions& opts = {}) {
  const detail::CountLikelihood lik(cov, variant);
  EstimateRecord rec;
  rec.date = cov.date;
  rec.model = variant;
  rec.data_fingerprint = cov.fingerprint();
  rec.observations = cov.size();

  detail::BetaFit best;
  double r = std::numeric_limits<double>::infinity();
  if (lik.poisson()) {
    best = detail::maximize_beta(lik, r, lik.moment_start(), opts);
  } else if (lik.total_count() == 0.0) {
    // All counts zero: rates sit at the boundary and r is not identified.
    r = opts.dispersion_max;
    best = detail::maximize_beta(lik, r, {0.0, 0.0}, opts);
  } else {
    detail::Beta warm = lik.moment_start();
    std::size_t inner_iterations = 0;
    auto negative_profile = [&](double log_r) {
      detail::BetaFit inner = detail::maximize_beta(lik, std::exp(log_r), warm, opts);
      warm = inner.beta;
      inner_iterations += inner.iterations;
      return -(lik.constant(std::exp(log_r)) + inner.value);
    };
    const double lo = std::log(opts.dispersion_min);
    const double hi = std::log(opts.dispersion_max);
    std::uintmax_t max_iter = 500;
    auto [log_r, neg] = boost::math::tools::brent_find_minima(negative_profile, lo, hi, opts.dispersion_bits, max_iter);
    // Brent never evaluates the bracket ends; the optimum may sit on one.
    for (double edge : {lo, hi}) {
      const double v = negative_profile(edge);
      if (v < neg) {
        neg = v;
        log_r = edge;
      }
    }
    r = std::clamp(std::exp(log_r), opts.dispersion_min, opts.dispersion_max);
    best = detail::maximize_beta(lik, r, warm, opts);
    best.iterations += inner_iterations;
  }
  rec.beta_loc = best.beta[0];
  rec.beta_mob = variant.with_mobility ? best.beta[1] : 0.0;
  rec.dispersion = r;
  rec.iterations = best.iterations;
  rec.loglik = lik.infeasible() ? detail::kNegInf : lik.constant(r) + best.value;
  rec.aic = 2.0 * parameter_count(variant) - 2.0 * rec.loglik;
  return rec;
}

/// Fit of the rates with the dispersion held fixed (negative binomial only).
inline EstimateRecord fit_fixed_dispersion(const Covariates& cov, bool with_mobility, double dispersion,
                                           const FitOptions& opts = {}) {
  const ModelVariant variant{CountModel::negbin, with_mobility};
  const detail::CountLikelihood lik(cov, variant);
  detail::BetaFit best = detail::maximize_beta(lik, dispersion, lik.moment_start(), opts);
  EstimateRecord rec;
  rec.date = cov.date;
  rec.model = variant;
  rec.data_fingerprint = cov.fingerprint();
  rec.observations = cov.size();
  rec.beta_loc = best.beta[0];
  rec.beta_mob = with_mobility ? best.beta[1] : 0.0;
  rec.dispersion = dispersion;
  rec.iterations = best.iterations;
  rec.loglik = lik.infeasible() ? detail::kNegInf : lik.constant(dispersion) + best.value;
  rec.aic = 2.0 * (parameter_count(variant) - 1) - 2.0 * rec.loglik;
  return rec;
}

/// Empirical quantile at order statistic (n+1)q, interpolated and clamped to
/// the sample range (type 6).
inline double quantile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double pos = std::clamp(q * (n + 1.0) - 1.0, 0.0, n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline Interval percentile_interval(const std::vector<double>& values, double level = 0.95) {
  const double tail = 0.5 * (1.0 - level);
  return {quantile(values, tail), quantile(values, 1.0 - tail)};
}

struct BootstrapOptions {
  std::size_t replicas = 100;
  std::uint64_t seed = 0;
  double max_drop_fraction = 0.1;
  FitOptions fit;
};

namespace detail {

inline std::mt19937_64 replica_engine(std::uint64_t seed, Date date, ModelVariant model, std::size_t replica) {
  const auto model_code = static_cast<std::uint32_t>((model.family == CountModel::negbin ? 2 : 0) +
                                                     (model.with_mobility ? 1 : 0));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(date.serial()), model_code, static_cast<std::uint32_t>(replica)};
  return std::mt19937_64(seq);
}

inline std::int64_t draw_count(std::mt19937_64& rng, double mean, double dispersion) {
  if (!(mean > 0.0)) return 0;
  double rate = mean;
  if (std::isfinite(dispersion)) {
    std::gamma_distribution<double> gamma(dispersion, mean / dispersion);
    rate = gamma(rng);
    if (!(rate > 0.0)) return 0;
  }
  std::poisson_distribution<std::int64_t> poisson(rate);
  return poisson(rng);
}

}  // namespace detail

/// Parametric bootstrap: resamples every count from the fitted model (the
/// negative binomial with r̂, or the Poisson) and refits. Replicas whose fit
/// fails are dropped; more than `max_drop_fraction` dropped is an error.
/// Intervals are 2.5/97.5 empirical percentiles.
inline EstimateRecord bootstrap(EstimateRecord record, const Covariates& cov, const BootstrapOptions& opts,
                                Diagnostics* diag = nullptr) {
  if (opts.replicas < 1) throw Error(ErrorCode::InvalidParameter, "bootstrap needs at least one replica");
  if (record.data_fingerprint != cov.fingerprint()) {
    throw Error(ErrorCode::MismatchedData, "bootstrap covariates differ from the fitted ones");
  }
  record.replicas.clear();
  record.dropped_replicas = 0;
  Covariates sample = cov;
  for (std::size_t b = 0; b < opts.replicas; ++b) {
    auto rng = detail::replica_engine(opts.seed, record.date, record.model, b);
    for (std::size_t i = 0; i < cov.size(); ++i) {
      const double mean = record.beta_loc * cov.x_loc[i] + record.beta_mob * cov.x_mob[i];
      sample.y[i] = detail::draw_count(rng, mean, record.model.family == CountModel::poisson
                                                      ? std::numeric_limits<double>::infinity()
                                                      : record.dispersion);
    }
    try {
      EstimateRecord refit = fit(sample, record.model, opts.fit);
      record.replicas.push_back({refit.beta_loc, refit.beta_mob, refit.dispersion});
    } catch (const Error& e) {
      ++record.dropped_replicas;
      detail::warn(diag, fmt::format("{} {}: bootstrap replica {} dropped: {}", record.date, record.model.name(),
                                     b, e.what()));
    }
  }
  if (static_cast<double>(record.dropped_replicas) > opts.max_drop_fraction * static_cast<double>(opts.replicas)) {
    throw Error(ErrorCode::TooManyDroppedReplicas,
                fmt::format("{} {}: {} of {} bootstrap replicas failed", record.date, record.model.name(),
                            record.dropped_replicas, opts.replicas));
  }
  std::vector<double> loc;
  std::vector<double> mob;
  std::vector<double> disp;
  for (const Replica& r : record.replicas) {
    loc.push_back(r.beta_loc);
    mob.push_back(r.beta_mob);
    disp.push_back(r.dispersion);
  }
  record.ci_beta_loc = percentile_interval(loc);
  record.ci_beta_mob = percentile_interval(mob);
  record.ci_dispersion = percentile_interval(disp);
  return record;
}

struct DerivedParams {
  double p_local = 1.0;
  double eps_c = 0.0;
  /// β_loc = β_mob = 0: p and εc hold conventional values.
  bool degenerate = false;
};

/// Fraction of local contacts p and the product εc = β_loc / p.
inline DerivedParams derived_params(double beta_loc, double beta_mob, double total_mobility,
                                    double total_population) {
  detail::require_rates(beta_loc, beta_mob);
  if (beta_mob == 0.0) {
    return {1.0, beta_loc, beta_loc == 0.0};
  }
  if (beta_loc == 0.0) {
    throw Error(ErrorCode::Undefined, "p = 0 and εc is undefined when β_loc = 0 and β_mob > 0");
  }
  const double local = total_population * beta_loc;
  const double p = local / (2.0 * beta_mob * total_mobility + local);
  return {p, beta_loc / p, false};
}

/// Fills p and εc of the point estimate and of every replica, and their
/// percentile intervals. Undefined cases are reported as p = 0, εc = NaN.
inline void attach_derived(EstimateRecord& record, double total_mobility, double total_population,
                           Diagnostics* diag = nullptr) {
  auto evaluate = [&](double bl, double bm, double& p, double& e, bool* degenerate) {
    try {
      DerivedParams d = derived_params(bl, bm, total_mobility, total_population);
      p = d.p_local;
      e = d.eps_c;
      if (degenerate) *degenerate = d.degenerate;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::Undefined) throw;
      p = 0.0;
      e = std::numeric_limits<double>::quiet_NaN();
      if (degenerate) detail::warn(diag, fmt::format("{} {}: {}", record.date, record.model.name(), err.what()));
    }
  };
  evaluate(record.beta_loc, record.beta_mob, record.p_local, record.eps_c, &record.derived_degenerate);
  std::vector<double> ps;
  std::vector<double> es;
  for (Replica& r : record.replicas) {
    evaluate(r.beta_loc, r.beta_mob, r.p_local, r.eps_c, nullptr);
    ps.push_back(r.p_local);
    es.push_back(r.eps_c);
  }
  if (!record.replicas.empty()) {
    record.ci_p_local = percentile_interval(ps);
    record.ci_eps_c = percentile_interval(es);
  }
}

inline double aic(const EstimateRecord& record) {
  return 2.0 * parameter_count(record.model) - 2.0 * record.loglik;
}

/// AIC(without mobility) − AIC(with mobility); above 10 strongly favours
/// the model with mobility.
inline double compare_aic(const EstimateRecord& with_mobility, const EstimateRecord& without_mobility) {
  if (with_mobility.date != without_mobility.date ||
      with_mobility.data_fingerprint != without_mobility.data_fingerprint ||
      with_mobility.model.family != without_mobility.model.family) {
    throw Error(ErrorCode::MismatchedData, "AIC comparison needs fits of one family on the same covariates");
  }
  return aic(without_mobility) - aic(with_mobility);
}

inline constexpr double kStrongAicDifference = 10.0;

}  // namespace metaseir

#endif  // METASEIR_ESTIMATION_HPP
