#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "mpforge/concentration.hpp"
#include "mpforge/error.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/rng.hpp"

using namespace mpforge;

namespace {

HarnessConfig gaussian_harness() {
  HarnessConfig h;
  h.model.prior = PriorSpec::gaussian(1.0);
  h.model.channel = ChannelSpec::awgn(0.01);
  h.model.law = SingularValueLaw::constant(1.0);
  h.model.delta = 0.5;
  h.algorithm = "vamp";
  h.sizes = {128};
  h.trials = 10;
  h.iterations = 3;
  h.seed = 99;
  h.workers = 2;
  return h;
}

std::vector<TrialRecord> synthetic(const std::vector<Eigen::Index>& sizes, const std::function<double(double)>& dev,
                                   int trials = 5) {
  std::vector<TrialRecord> out;
  for (Eigen::Index n : sizes)
    for (int t = 0; t < trials; ++t) {
      TrialRecord r;
      r.n = n;
      r.trial = static_cast<std::size_t>(t);
      r.k = 0;
      r.functional = "f";
      r.deviation = dev(static_cast<double>(n));
      out.push_back(r);
    }
  return out;
}

bool same_records(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].n != b[i].n || a[i].trial != b[i].trial || a[i].k != b[i].k || a[i].functional != b[i].functional)
      return false;
    if (a[i].empirical != b[i].empirical || a[i].prediction != b[i].prediction) return false;
  }
  return true;
}

}  // namespace

TEST(Functionals, BuiltinExamples) {
  auto all = builtin_functionals();
  Rng rng(71);
  Eigen::VectorXd a = rng.normal_vector(100000), b = rng.normal_vector(100000);
  EXPECT_EQ(empirical_average(find_functional(all, "squared_error"), a, a), 0.0);
  EXPECT_NEAR(empirical_average(find_functional(all, "product"), a, b), 0.0, 0.02);
  EXPECT_NEAR(empirical_average(find_functional(all, "second_moment"), a, b), 1.0, 0.02);
  EXPECT_NEAR(empirical_average(find_functional(all, "squared_error"), a, b), 2.0, 0.04);
  try {
    find_functional(all, "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_config);
    EXPECT_EQ(e.field(), "functionals");
  }
}

TEST(Functionals, PseudoLipschitzConstantsAreModerate) {
  Rng rng(72);
  for (const auto& f : builtin_functionals()) {
    double c = estimate_pl2_constant(f, rng, 5000);
    EXPECT_TRUE(std::isfinite(c)) << f.name;
    EXPECT_GT(c, 0.0) << f.name;
    EXPECT_LT(c, 10.0) << f.name;
  }
}

TEST(Harness, RecordCountIsTrialsTimesIterationsTimesFunctionals) {
  HarnessConfig h = gaussian_harness();
  h.trials = 100;
  h.sizes = {64};
  h.functionals = {"squared_error", "second_moment"};
  auto recs = run_trials(h);
  EXPECT_EQ(recs.size(), 100u * 3u * 2u);
  std::set<int> ks;
  for (const auto& r : recs) ks.insert(r.k);
  EXPECT_EQ(ks, (std::set<int>{0, 1, 2}));
}

TEST(Harness, SingleTrialIsTheSolverRun) {
  HarnessConfig h = gaussian_harness();
  h.trials = 1;
  auto recs = run_trials(h);
  ProblemInstance inst = sample_instance(h.model, 128, h.seed, 0);
  SolverConfig cfg = h.solver;
  cfg.max_iters = h.iterations - 1;
  cfg.stop_change_eps = 0.0;
  cfg.init_seed = trial_init_seed(h.seed, 0);
  SolverTrace direct = run_vamp(inst, h.model.prior, cfg);
  const auto& f = find_functional(builtin_functionals(), "squared_error");
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.empirical, empirical_average(f, direct.x_hat[static_cast<std::size_t>(r.k)], inst.x0));
    EXPECT_EQ(r.deviation, std::abs(r.empirical - r.prediction));
  }
  ProblemInstance again;
  SolverTrace via = run_harness_trial(h, 128, 0, again);
  EXPECT_TRUE((via.final_x_hat.array() == direct.final_x_hat.array()).all());
}

TEST(Harness, WorkerCountDoesNotChangeRecords) {
  HarnessConfig h = gaussian_harness();
  h.sizes = {64, 128};
  h.trials = 6;
  h.workers = 1;
  auto one = run_trials(h);
  h.workers = 4;
  auto four = run_trials(h);
  EXPECT_TRUE(same_records(one, four));
}

TEST(Harness, GaussianModelDeviationIsSmall) {
  HarnessConfig h = gaussian_harness();
  h.sizes = {1024};
  h.trials = 20;
  auto recs = run_trials(h);
  DeviationSummary s = summarize(recs);
  for (const auto& row : s.rows) EXPECT_LT(row.median, 0.05 * recs.front().prediction) << row.k;
}

// Probit messages are correlated with the truth, so the prediction must carry cx1.
TEST(Harness, SquaredErrorPredictionIsSeMse) {
  HarnessConfig h = gaussian_harness();
  h.model.prior = PriorSpec::bernoulli_gaussian(0.1, 1.0);
  h.model.channel = ChannelSpec::probit(0.01);
  h.algorithm = "gvamp";
  h.sizes = {64};
  h.trials = 1;
  h.iterations = 5;
  SETrajectory se = harness_state_evolution(h);
  for (const auto& r : run_trials(h))
    EXPECT_NEAR(r.prediction, se.steps[static_cast<std::size_t>(r.k)].mse_pred, 1e-9) << r.k;
}

TEST(Harness, IterateFunctionalsUseGaussianProcess) {
  HarnessConfig h = gaussian_harness();
  h.model.prior = PriorSpec::bernoulli_gaussian(0.2, 1.0);
  h.model.law = SingularValueLaw::uniform(3.0);
  h.sizes = {512};
  h.trials = 8;
  h.iterations = 3;
  h.functionals = {"iterate_second", "iterate_lag1"};
  h.gp_opts.mc_samples = 100000;
  auto recs = run_trials(h);
  EXPECT_EQ(recs.size(), 8u * (3u + 2u));
  // sample covariances of N Gaussian pairs fluctuate by about sqrt(2 / N) times the variance scale
  double scale = 0.0;
  for (const auto& r : recs)
    if (r.functional == "iterate_second") scale = std::max(scale, r.prediction);
  for (const auto& r : recs) {
    if (r.functional == "iterate_lag1") {
      EXPECT_GE(r.k, 1);
    }
    EXPECT_LT(r.deviation, 5.0 * std::sqrt(2.0 / 512.0) * scale) << r.functional << " k=" << r.k;
  }
  h.algorithm = "amp";
  EXPECT_THROW(run_trials(h), Error);
}

TEST(Harness, InvalidSetupNamesField) {
  HarnessConfig h = gaussian_harness();
  h.model.delta = 1.5;
  try {
    run_trials(h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_config);
    EXPECT_EQ(e.field(), "model.delta");
  }
}

TEST(Summary, SlopeOfInverseSquareRootIsMinusHalf) {
  auto recs = synthetic({100, 400, 1600, 6400}, [](double n) { return 3.0 / std::sqrt(n); });
  DeviationSummary s = summarize(recs);
  ASSERT_EQ(s.rows.size(), 4u);
  for (const auto& row : s.rows) {
    ASSERT_TRUE(row.slope.has_value());
    EXPECT_NEAR(*row.slope, -0.5, 1e-12);
  }
  auto flat = summarize(synthetic({100, 400}, [](double) { return 0.2; }));
  EXPECT_NEAR(*flat.rows[0].slope, 0.0, 1e-12);
}

TEST(Summary, SingleSizeHasNoSlope) {
  auto s = summarize(synthetic({100}, [](double) { return 0.2; }));
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_FALSE(s.rows[0].slope.has_value());
  EXPECT_FALSE(s.notices.empty());
}

TEST(Summary, QuantilesAndTails) {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(fit_slope({1.0, 2.0, 3.0}, {2.0, 4.5, 7.0}), 2.5);

  auto recs = synthetic({100, 400}, [](double n) { return 1.0 / n; });
  for (const auto& row : tail_estimate(recs, 0.0)) EXPECT_DOUBLE_EQ(row.frequency, 1.0);
  for (const auto& row : tail_estimate(recs, std::numeric_limits<double>::infinity()))
    EXPECT_DOUBLE_EQ(row.frequency, 0.0);
  DeviationSummary s = summarize(recs, {0.005});
  EXPECT_DOUBLE_EQ(s.rows[0].tail[0], 1.0);
  EXPECT_DOUBLE_EQ(s.rows[1].tail[0], 0.0);
  EXPECT_LE(s.rows[0].q10, s.rows[0].q25);
  EXPECT_LE(s.rows[0].q75, s.rows[0].q90);
}

TEST(Summary, TailIncreaseIsFlagged) {
  std::vector<TrialRecord> recs = synthetic({100}, [](double) { return 0.0; }, 200);
  auto big = synthetic({400}, [](double) { return 1.0; }, 200);
  recs.insert(recs.end(), big.begin(), big.end());
  auto rows = tail_estimate(recs, 0.5);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].increase_flagged);
  EXPECT_TRUE(rows[1].increase_flagged);
}
