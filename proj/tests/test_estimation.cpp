#include <cmath>
#include <random>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include "metaseir/estimation.hpp"
#include "support/synthetic.hpp"

using namespace metaseir;

namespace {

Covariates single(double x_loc, std::int64_t y) {
  Covariates c;
  c.date = Date{2020, 4, 1};
  c.x_loc = {x_loc};
  c.x_mob = {0.0};
  c.y = {y};
  return c;
}

Covariates small_design(synth::Rng& rng, std::size_t n, double bl, double bm, double r) {
  synth::DesignSpec spec;
  spec.regions = n;
  spec.beta_loc = bl;
  spec.beta_mob = bm;
  spec.dispersion = r;
  return synth::nb_day(rng, spec).cov;
}

const ModelVariant kNbMob{CountModel::negbin, true};
const ModelVariant kNbNoMob{CountModel::negbin, false};
const ModelVariant kPoMob{CountModel::poisson, true};
const ModelVariant kPoNoMob{CountModel::poisson, false};

}  // namespace

TEST(Variant, NamesRoundTrip) {
  for (ModelVariant v : {kNbMob, kNbNoMob, kPoMob, kPoNoMob}) EXPECT_EQ(ModelVariant::parse(v.name()), v);
  EXPECT_EQ(kNbMob.name(), "negbin_mob");
  EXPECT_EQ(parameter_count(kNbMob), 3);
  EXPECT_EQ(parameter_count(kPoNoMob), 1);
  EXPECT_THROW(ModelVariant::parse("gauss_mob"), Error);
}

TEST(Covariates, HandComputedThreeRegions) {
  RegionalState today;
  today.date = Date{2020, 4, 1};
  today.population = {1000.0, 2000.0, 500.0};
  today.regions = {{900, 20, 10, 30, 20, 20}, {1800, 50, 40, 60, 20, 30}, {500, 0, 0, 0, 0, 0}};
  RegionalState tomorrow = today;
  tomorrow.date = today.date + 1;
  tomorrow.regions[0].susceptible = 880.4;
  tomorrow.regions[1].susceptible = 1790.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(0, 1) = 100.0;
  m(2, 0) = 50.0;
  m(1, 2) = 10.0;
  const Covariates c = build_covariates(today, tomorrow, MobilityMatrix(m));
  EXPECT_NEAR(c.x_loc[0], 0.9 * 40.0, 1e-12);
  EXPECT_NEAR(c.x_loc[1], 0.9 * 100.0, 1e-12);
  EXPECT_NEAR(c.x_loc[2], 0.0, 1e-12);
  // u = (0.03, 0.03, 0)
  EXPECT_NEAR(c.x_mob[0], 0.9 * (100.0 * 0.03 + 50.0 * 0.0), 1e-12);
  EXPECT_NEAR(c.x_mob[1], 0.9 * (100.0 * 0.03 + 10.0 * 0.0), 1e-12);
  EXPECT_NEAR(c.x_mob[2], 1.0 * (50.0 * 0.03 + 10.0 * 0.03), 1e-12);
  EXPECT_EQ(c.y, (std::vector<std::int64_t>{20, 10, 0}));
}

TEST(Covariates, DegenerateCases) {
  RegionalState s;
  s.date = Date{2020, 4, 1};
  s.population = {1000.0, 1000.0};
  s.regions = {{1000, 0, 0, 0, 0, 0}, {1000, 0, 0, 0, 0, 0}};
  RegionalState t = s;
  t.date = s.date + 1;
  synth::Rng rng(1);
  const Covariates none = build_covariates(s, t, synth::random_mobility(rng, 2));
  EXPECT_EQ(none.x_loc, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(none.x_mob, (std::vector<double>{0.0, 0.0}));

  s.regions[0] = {1000, 0, 0, 10, 0, 0};
  s.population = {1000.0, 1000.0};
  const Covariates c = build_covariates(s, t, MobilityMatrix::zeros(2));
  EXPECT_DOUBLE_EQ(c.x_loc[0], 10.0);
  EXPECT_DOUBLE_EQ(c.x_mob[0], 0.0);
  t.date = s.date + 2;
  EXPECT_THROW(build_covariates(s, t, MobilityMatrix::zeros(2)), Error);
}

TEST(Loglik, PoissonExamples) {
  EXPECT_DOUBLE_EQ(loglik_poisson(2.0, 0.0, single(1.0, 0)), -2.0);
  EXPECT_NEAR(loglik_poisson(1.0, 0.0, single(3.0, 3)), 3 * std::log(3.0) - 3 - std::log(6.0), 1e-12);
  EXPECT_EQ(loglik_poisson(0.0, 0.0, single(3.0, 3)), -std::numeric_limits<double>::infinity());
}

TEST(Loglik, NegbinExamples) {
  EXPECT_NEAR(loglik_negbin(1.0, 0.0, 1.0, single(1.0, 2)), std::log(1.0 / 8.0), 1e-12);
  Covariates zeros;
  zeros.x_loc = {1.0, 2.0, 5.0};
  zeros.x_mob = {3.0, 0.0, 1.0};
  zeros.y = {0, 0, 0};
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += -4.0 * std::log(1.0 + (0.5 * zeros.x_loc[i] + 0.2 * zeros.x_mob[i]) / 4.0);
  EXPECT_NEAR(loglik_negbin(0.5, 0.2, 4.0, zeros), expected, 1e-12);
}

TEST(Loglik, MatchesBoostDistributions) {
  synth::Rng rng(31);
  const Covariates c = small_design(rng, 40, 0.3, 0.1, 5.0);
  for (double r : {0.5, 3.0, 40.0}) {
    double nb = 0.0;
    double po = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double lambda = 0.25 * c.x_loc[i] + 0.12 * c.x_mob[i];
      nb += std::log(boost::math::pdf(boost::math::negative_binomial(r, r / (r + lambda)), c.y[i]));
      po += std::log(boost::math::pdf(boost::math::poisson_distribution<>(lambda), c.y[i]));
    }
    EXPECT_NEAR(loglik_negbin(0.25, 0.12, r, c), nb, 1e-8 * std::abs(nb));
    EXPECT_NEAR(loglik_poisson(0.25, 0.12, c), po, 1e-8 * std::abs(po));
  }
}

TEST(Loglik, PoissonLimit) {
  synth::Rng rng(5);
  const Covariates c = small_design(rng, 10, 0.3, 0.1, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(loglik_negbin(0.3, 0.1, 1e8, c), loglik_poisson(0.3, 0.1, c), 1e-4);
}

TEST(Fit, PoissonClosedForm) {
  synth::Rng rng(6);
  Covariates c = small_design(rng, 50, 0.4, 0.0, std::numeric_limits<double>::infinity());
  std::fill(c.x_mob.begin(), c.x_mob.end(), 0.0);
  double sy = 0.0;
  double sx = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    sy += static_cast<double>(c.y[i]);
    sx += c.x_loc[i];
  }
  const EstimateRecord rec = fit(c, kPoNoMob);
  EXPECT_NEAR(rec.beta_loc, sy / sx, 1e-9 * sy / sx);
  EXPECT_EQ(rec.beta_mob, 0.0);
  EXPECT_TRUE(std::isinf(rec.dispersion));
}

TEST(Fit, AllZeroCountsSitAtBoundary) {
  synth::Rng rng(7);
  Covariates c = small_design(rng, 20, 0.3, 0.1, 5.0);
  std::fill(c.y.begin(), c.y.end(), 0);
  for (ModelVariant v : {kNbMob, kPoMob}) {
    const EstimateRecord rec = fit(c, v);
    EXPECT_EQ(rec.beta_loc, 0.0);
    EXPECT_EQ(rec.beta_mob, 0.0);
    EXPECT_EQ(rec.loglik, 0.0);
  }
  BootstrapOptions boot;
  boot.replicas = 20;
  const EstimateRecord b = bootstrap(fit(c, kNbMob), c, boot);
  EXPECT_EQ(b.ci_beta_loc.lo, 0.0);
  EXPECT_EQ(b.ci_beta_loc.hi, 0.0);
  EXPECT_EQ(b.ci_beta_mob.hi, 0.0);
}

TEST(Fit, NestingWhenMobilityIsZero) {
  synth::Rng rng(8);
  Covariates c = small_design(rng, 60, 0.3, 0.0, 8.0);
  std::fill(c.x_mob.begin(), c.x_mob.end(), 0.0);
  const EstimateRecord with = fit(c, kNbMob);
  const EstimateRecord without = fit(c, kNbNoMob);
  EXPECT_EQ(with.beta_mob, 0.0);
  EXPECT_NEAR(with.beta_loc, without.beta_loc, 1e-9 * without.beta_loc);
  EXPECT_NEAR(with.loglik, without.loglik, 1e-9 * std::abs(without.loglik));
  EXPECT_NEAR(compare_aic(with, without), -2.0, 1e-6);
}

TEST(Fit, BeatsCoarseGridSearch) {
  synth::Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Covariates c = small_design(rng, 80, 0.3, 0.1, 6.0);
    const EstimateRecord rec = fit(c, kNbMob);
    double best = -std::numeric_limits<double>::infinity();
    for (double bl = 0.0; bl <= 0.6; bl += 0.01) {
      for (double bm = 0.0; bm <= 0.4; bm += 0.01) {
        for (double lr = -2.0; lr <= 6.0; lr += 0.25) {
          best = std::max(best, loglik_negbin(bl, bm, std::exp(lr), c));
        }
      }
    }
    EXPECT_GE(rec.loglik, best - 1e-9);
    EXPECT_NEAR(rec.loglik, loglik_negbin(rec.beta_loc, rec.beta_mob, rec.dispersion, c), 1e-9);
  }
}

TEST(Fit, StationaryAtInteriorOptimum) {
  synth::Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Covariates c = small_design(rng, 120, 0.3, 0.1, 10.0);
    const EstimateRecord rec = fit(c, kNbMob);
    ASSERT_GT(rec.beta_mob, 0.0);
    const double h = 1e-6;
    auto f = [&](double bl, double bm, double lr) { return loglik_negbin(bl, bm, std::exp(lr), c); };
    const double lr = std::log(rec.dispersion);
    const double g1 = (f(rec.beta_loc + h, rec.beta_mob, lr) - f(rec.beta_loc - h, rec.beta_mob, lr)) / (2 * h);
    const double g2 = (f(rec.beta_loc, rec.beta_mob + h, lr) - f(rec.beta_loc, rec.beta_mob - h, lr)) / (2 * h);
    const double g3 = (f(rec.beta_loc, rec.beta_mob, lr + h) - f(rec.beta_loc, rec.beta_mob, lr - h)) / (2 * h);
    const double tol = 1e-6 * (1.0 + std::abs(rec.loglik));
    EXPECT_LT(std::abs(g1), tol);
    EXPECT_LT(std::abs(g2), tol);
    EXPECT_LT(std::abs(g3), tol);
  }
}

TEST(Fit, ScalingMobilityRescalesRate) {
  synth::Rng rng(12);
  const Covariates c = small_design(rng, 100, 0.3, 0.1, 10.0);
  Covariates scaled = c;
  for (double& x : scaled.x_mob) x *= 3.0;
  const EstimateRecord a = fit(c, kNbMob);
  const EstimateRecord b = fit(scaled, kNbMob);
  EXPECT_NEAR(b.beta_mob, a.beta_mob / 3.0, 1e-6 * a.beta_mob / 3.0);
  EXPECT_NEAR(b.beta_loc, a.beta_loc, 1e-6 * a.beta_loc);
}

TEST(Fit, NegbinApproachesPoisson) {
  synth::Rng rng(13);
  const Covariates c = small_design(rng, 80, 0.3, 0.1, std::numeric_limits<double>::infinity());
  const EstimateRecord po = fit(c, kPoMob);
  const EstimateRecord nb = fit_fixed_dispersion(c, true, 1e8);
  EXPECT_NEAR(nb.beta_loc, po.beta_loc, 1e-3 * po.beta_loc);
  EXPECT_NEAR(nb.beta_mob, po.beta_mob, 1e-3 * po.beta_mob);
}

TEST(Fit, ZeroDesignRowWithCasesIsInfeasible) {
  Covariates c = single(0.0, 4);
  c.x_loc.push_back(2.0);
  c.x_mob.push_back(0.0);
  c.y.push_back(1);
  EXPECT_EQ(fit(c, kPoNoMob).loglik, -std::numeric_limits<double>::infinity());
}

TEST(Bootstrap, ReplicaCountAndDeterminism) {
  synth::Rng rng(14);
  const Covariates c = small_design(rng, 60, 0.3, 0.1, 10.0);
  BootstrapOptions opts;
  opts.seed = 99;
  const EstimateRecord a = bootstrap(fit(c, kNbMob), c, opts);
  const EstimateRecord b = bootstrap(fit(c, kNbMob), c, opts);
  ASSERT_EQ(a.replicas.size(), 100u);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(a.replicas[k].beta_loc, b.replicas[k].beta_loc);
  EXPECT_LE(a.ci_beta_loc.lo, a.ci_beta_loc.hi);
  opts.seed = 100;
  const EstimateRecord other = bootstrap(fit(c, kNbMob), c, opts);
  EXPECT_NE(other.replicas[0].beta_loc, a.replicas[0].beta_loc);
}

TEST(Bootstrap, RejectsForeignCovariates) {
  synth::Rng rng(15);
  const Covariates c = small_design(rng, 30, 0.3, 0.1, 10.0);
  Covariates d = c;
  d.y[0] += 1;
  EXPECT_THROW(bootstrap(fit(c, kNbMob), d, {}), Error);
}

TEST(Quantile, OrderStatisticPosition) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.25);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.01), 1.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.99), 4.0);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.975), 7.0);
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  // positions 101·0.025 and 101·0.975
  const Interval iv = percentile_interval(v);
  EXPECT_NEAR(iv.lo, 2.525, 1e-12);
  EXPECT_NEAR(iv.hi, 98.475, 1e-12);
}

TEST(Quantile, IntervalContentMatchesLevel) {
  // Expected mass between order statistics j < k of n uniforms is (k-j)/(n+1).
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u;
  double mass = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(100);
    for (double& x : v) x = u(rng);
    const Interval iv = percentile_interval(v);
    mass += iv.hi - iv.lo;
  }
  EXPECT_NEAR(mass / trials, 0.95, 0.002);
}

TEST(Derived, Examples) {
  const DerivedParams a = derived_params(0.3, 0.0, 100.0, 1000.0);
  EXPECT_DOUBLE_EQ(a.p_local, 1.0);
  EXPECT_DOUBLE_EQ(a.eps_c, 0.3);
  const DerivedParams b = derived_params(0.3, 0.5, 100.0, 1000.0);
  EXPECT_NEAR(b.p_local, 0.75, 1e-15);
  EXPECT_NEAR(b.eps_c, 0.4, 1e-15);
  const DerivedParams z = derived_params(0.0, 0.0, 100.0, 1000.0);
  EXPECT_TRUE(z.degenerate);
  EXPECT_DOUBLE_EQ(z.p_local, 1.0);
  EXPECT_DOUBLE_EQ(z.eps_c, 0.0);
  try {
    derived_params(0.0, 0.2, 100.0, 1000.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Undefined);
  }
}

TEST(Derived, InvariantUnderMobilityScaling) {
  const DerivedParams a = derived_params(0.3, 0.12, 5e4, 1e6);
  const DerivedParams b = derived_params(0.3, 0.04, 1.5e5, 1e6);
  EXPECT_NEAR(a.p_local, b.p_local, 1e-14);
  EXPECT_NEAR(a.eps_c, b.eps_c, 1e-14);
}

TEST(Aic, Examples) {
  EstimateRecord with;
  with.model = kNbMob;
  with.loglik = -100.0;
  EstimateRecord without;
  without.model = kNbNoMob;
  without.loglik = -110.0;
  EXPECT_DOUBLE_EQ(aic(with), 206.0);
  EXPECT_DOUBLE_EQ(compare_aic(with, without), 18.0);
  EXPECT_GT(compare_aic(with, without), kStrongAicDifference);
  without.loglik = -100.0;
  EXPECT_DOUBLE_EQ(compare_aic(with, without), -2.0);
  without.model = kPoNoMob;
  EXPECT_THROW(compare_aic(with, without), Error);
}
