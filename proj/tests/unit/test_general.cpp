#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "mpforge/error.hpp"
#include "mpforge/general_recursion.hpp"
#include "mpforge/general_se.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/state_evolution.hpp"

using namespace mpforge;

namespace {

ModelSpec bg_model(ChannelSpec channel) {
  ModelSpec m;
  m.prior = PriorSpec::bernoulli_gaussian(0.2, 1.0);
  m.channel = channel;
  m.law = SingularValueLaw::uniform(3.0);
  m.delta = 0.5;
  return m;
}

SolverConfig cfg_with_seed(std::uint64_t seed) {
  SolverConfig c;
  c.init_seed = seed;
  c.stop_change_eps = 0.0;
  return c;
}

double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(GeneralRecursion, GammaUpdateFixesSecondColumn) {
  SolverConfig cfg;
  Vec2 g = translated_gamma_update({2.0, 1.0}, {0.5, 0.0}, cfg);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
  g = translated_gamma_update({1.0, 7.0}, {0.2, 0.9}, cfg);
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

class Translation : public ::testing::TestWithParam<ChannelKind> {};

TEST_P(Translation, GvampTraceReproducedWithPinnedSecondColumn) {
  ChannelSpec ch = GetParam() == ChannelKind::awgn ? ChannelSpec::awgn(0.01) : ChannelSpec::probit(0.01);
  ModelSpec m = bg_model(ch);
  ProblemInstance inst = sample_instance(m, 128, 61, 0);
  TranslationReport rep = check_translation_equivalence(inst, m.prior, ch, cfg_with_seed(3), 6);
  EXPECT_TRUE(rep.pass) << rep.max_discrepancy;
  EXPECT_EQ(rep.rows.size(), 7u);
  EXPECT_LT(rep.max_discrepancy, 1e-10);
  EXPECT_LT(rep.column2_error, 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Channels, Translation, ::testing::Values(ChannelKind::awgn, ChannelKind::probit));

TEST(GeneralRecursion, VampTranslationMatchesSolver) {
  ModelSpec m = bg_model(ChannelSpec::awgn(0.01));
  ProblemInstance inst = sample_instance(m, 128, 62, 0);
  TranslationReport rep = check_translation_equivalence_vamp(inst, m.prior, cfg_with_seed(4), 6);
  EXPECT_TRUE(rep.pass) << rep.max_discrepancy;
  EXPECT_LT(rep.max_discrepancy, 1e-10);
}

TEST(GeneralRecursion, TranslatedQMapAtZeroSingularValue) {
  ModelSpec m = bg_model(ChannelSpec::awgn(0.01));
  ProblemInstance inst = sample_instance(m, 16, 63, 0);
  GeneralInputs g = translate_gvamp(inst, m.prior, m.channel, SolverConfig{});
  // unpaired rows (s = 0) pass q_in through unchanged with unit derivative
  RowEval e = g.f_q_in({0.3, -1.0}, {5.0, 2.0}, {0.0, 0.0}, {4.0, 1.0}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(e.value[0], 0.3);
  EXPECT_DOUBLE_EQ(e.deriv[0], 1.0);
  EXPECT_DOUBLE_EQ(e.deriv[1], 0.0);
  RowEval o = g.f_q_out({0.3, -1.0}, {5.0, 2.0}, {0.0, 0.0}, {4.0, 1.0}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(o.value[0], 0.0);
  EXPECT_DOUBLE_EQ(o.value[1], 0.0);
}

TEST(GeneralRecursion, VampRunnerEqualsGvampRunnerWithStubbedOutput) {
  ModelSpec m = bg_model(ChannelSpec::awgn(0.01));
  ProblemInstance inst = sample_instance(m, 64, 64, 0);
  GeneralInputs g = translate_vamp(inst, m.prior, cfg_with_seed(5));
  const Eigen::Index mm = inst.m();
  g.u = std::make_shared<const OrthogonalMatrix>(OrthogonalMatrix::identity(mm));
  g.u0_out = Eigen::MatrixXd::Zero(mm, 1);
  g.w_p_out = g.w_q_out = Eigen::MatrixXd::Zero(mm, 1);
  g.f_p_out = g.f_q_out = [](const Vec2&, const Vec2&, const Vec2&, const Vec2&, const Vec2&) { return RowEval{}; };
  g.gamma_p_out = g.gamma_q_out = [](const Vec2&, const Vec2&) { return Vec2{1.0, 1.0}; };
  auto a = run_general_vamp(g, 5);
  auto b = run_general_gvamp(g, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_LT(max_abs(a[k].p_in - b[k].p_in), 1e-12);
    EXPECT_LT(max_abs(a[k].q_in - b[k].q_in), 1e-12);
    EXPECT_NEAR(a[k].alpha_q_in[0], b[k].alpha_q_in[0], 1e-12);
    EXPECT_NEAR(a[k].gamma_p_in[0], b[k].gamma_p_in[0], 1e-12 * a[k].gamma_p_in[0]);
  }
}

TEST(GeneralRecursion, OrthogonalStepsPreserveNormsAndLinearMapsCancel) {
  Rng rng(65);
  const Eigen::Index n = 40;
  GeneralInputs g;
  g.d = 2;
  g.v = std::make_shared<const OrthogonalMatrix>(sample_haar(n, rng));
  g.u0_in = Eigen::MatrixXd::Random(n, 2);
  g.w_p_in = g.w_q_in = Eigen::MatrixXd::Zero(n, 1);
  // column 2 is linear with slope c, so its Onsager combination (c p - c p) / (1 - c) vanishes
  g.f_p_in = [](const Vec2& p, const Vec2&, const Vec2&, const Vec2&, const Vec2&) {
    double t = std::tanh(p[0]);
    return RowEval{{t, 0.6 * p[1]}, {1.0 - t * t, 0.6}};
  };
  g.f_q_in = [](const Vec2& q, const Vec2&, const Vec2&, const Vec2&, const Vec2&) {
    return RowEval{{std::tanh(q[0]), q[1] * q[1]}, {1.0 - std::tanh(q[0]) * std::tanh(q[0]), 2.0 * q[1]}};
  };
  g.gamma_q_in = g.gamma_p_in = [](const Vec2& gm, const Vec2&) { return gm; };
  auto states = run_general_vamp(g, 3);
  ASSERT_EQ(states.size(), 4u);
  for (const auto& st : states) {
    EXPECT_NEAR(st.p_in.norm(), st.u_in.norm(), 1e-12 * (1.0 + st.u_in.norm()));
    EXPECT_NEAR(st.q_in.norm(), st.v_in.norm(), 1e-12 * (1.0 + st.v_in.norm()));
    EXPECT_LT(max_abs(st.v_in.col(1)), 1e-14);
    EXPECT_GT(st.v_in.col(0).norm(), 0.1);
    EXPECT_DOUBLE_EQ(st.alpha_p_in[1], 0.6);
  }
  EXPECT_EQ(run_general_vamp(g, 0).size(), 1u);
  g.d = 3;
  EXPECT_THROW(run_general_vamp(g, 1), Error);
}

TEST(GaussianProcess, RegressLastKnownValues) {
  Eigen::MatrixXd s(2, 2);
  s << 2.0, 1.0, 1.0, 3.0;
  Eigen::VectorXd beta;
  double rho = 0.0;
  regress_last(s, 1, beta, rho);
  ASSERT_EQ(beta.size(), 1);
  EXPECT_DOUBLE_EQ(beta(0), 0.5);
  EXPECT_DOUBLE_EQ(rho, 2.5);
  Eigen::MatrixXd sing(3, 3);
  sing << 1, 1, 0.5, 1, 1, 0.5, 0.5, 0.5, 1;
  try {
    regress_last(sing, 2, beta, rho);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric_error);
  }
}

TEST(GeneralSe, VampTranslationAgreesWithScalarSe) {
  ModelSpec m = bg_model(ChannelSpec::awgn(0.01));
  SolverConfig cfg;
  SEInit init = se_init(m, cfg);
  SETrajectory q = run_se_vamp(m, init, 3, cfg);
  GeneralSeOptions opts;
  opts.seed = 7;
  SETrajectory g = run_se_general(GeneralSeModel::from(m, GeneralKind::vamp), init, 3, cfg, opts);
  ASSERT_TRUE(g.has_stderr());
  for (std::size_t k = 0; k < q.steps.size(); ++k) {
    EXPECT_NEAR(g.steps[k].mse_pred, q.steps[k].mse_pred, 4.0 * g.stderr_steps[k].mse_pred + 1e-10) << k;
    EXPECT_NEAR(g.steps[k].alpha1, q.steps[k].alpha1, 4.0 * g.stderr_steps[k].alpha1 + 1e-10) << k;
    EXPECT_NEAR(g.steps[k].sigma2_1, q.steps[k].sigma2_1, 4.0 * g.stderr_steps[k].sigma2_1 + 1e-10) << k;
  }
}

TEST(GaussianProcess, SecondMomentEqualsSeVariance) {
  ModelSpec m = bg_model(ChannelSpec::awgn(0.01));
  SolverConfig cfg;
  SETrajectory se = run_se_vamp(m, se_init(m, cfg), 4, cfg);
  GeneralSeOptions opts;
  opts.seed = 8;
  GaussianProcessModel gp = track_gaussian_process(GeneralSeModel::from(m, GeneralKind::vamp), se, 4, opts);
  ASSERT_GE(gp.in.p_second.size(), 5u);
  for (std::size_t k = 0; k <= 4; ++k)
    EXPECT_NEAR(gp.in.p_second[k], se.steps[k].sigma2_1, 4.0 * gp.in.p_second_stderr[k] + 1e-10) << k;
  EXPECT_NEAR(gp.in.sigma_u(0, 0), se.steps[0].sigma2_1, 0.02 * se.steps[0].sigma2_1);
  EXPECT_LT((gp.in.sigma_u - gp.in.sigma_u.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

// Probit couples the errors to the truth; both Monte Carlo engines must follow the quadrature SE.
class ProbitCoupling : public ::testing::TestWithParam<InitMode> {};

TEST_P(ProbitCoupling, GeneralSeAndProcessFollowQuadrature) {
  ModelSpec m = bg_model(ChannelSpec::probit(0.01));
  SolverConfig cfg;
  cfg.init = GetParam();
  SEInit init = se_init(m, cfg);
  SETrajectory q = run_se_gvamp(m, init, 4, cfg);
  GeneralSeOptions opts;
  opts.seed = 9;
  GeneralSeModel gm = GeneralSeModel::from(m, GeneralKind::gvamp);
  SETrajectory g = run_se_general(gm, init, 4, cfg, opts);
  for (std::size_t k = 0; k < q.steps.size(); ++k) {
    const SEStep &a = g.steps[k], &e = g.stderr_steps[k], &b = q.steps[k];
    EXPECT_NEAR(a.mse_pred, b.mse_pred, 4.0 * e.mse_pred + 1e-10) << k;
    EXPECT_NEAR(a.mse_z1, b.mse_z1, 4.0 * e.mse_z1 + 1e-10) << k;
    EXPECT_NEAR(a.rho2_1, b.rho2_1, 4.0 * e.rho2_1 + 1e-10) << k;
    EXPECT_NEAR(a.cz1, b.cz1, 4.0 * e.cz1 + 1e-10) << k;
    EXPECT_NEAR(a.cx2, b.cx2, 4.0 * e.cx2 + 1e-10) << k;
  }
  GaussianProcessModel gp = track_gaussian_process(gm, g, 4, opts);
  for (std::size_t k = 0; k <= 4; ++k) {
    double tol_in = 4.0 * std::hypot(gp.in.p_second_stderr[k], g.stderr_steps[k].sigma2_1);
    double tol_out = 4.0 * std::hypot(gp.out.p_second_stderr[k], g.stderr_steps[k].rho2_1);
    EXPECT_NEAR(gp.in.p_second[k], g.steps[k].sigma2_1, tol_in) << k;
    EXPECT_NEAR(gp.out.p_second[k], g.steps[k].rho2_1, tol_out) << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Inits, ProbitCoupling, ::testing::Values(InitMode::error_haar, InitMode::haar),
                         [](const auto& info) { return info.param == InitMode::haar ? "haar" : "error_haar"; });
