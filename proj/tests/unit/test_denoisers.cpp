#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include <gtest/gtest.h>

#include "mpforge/denoisers.hpp"
#include "mpforge/ensembles.hpp"
#include "mpforge/error.hpp"
#include "mpforge/rng.hpp"
#include "mpforge/special.hpp"

using namespace mpforge;

namespace {

double gauss(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

// Composite Simpson on [a, b] with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 200000) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

struct Moments {
  double mean, var;
};

// Posterior moments of X given weight w(x) = prior density times likelihood, plus an optional atom at 0.
Moments posterior_numeric(const std::function<double(double)>& w, double lo, double hi, double atom0 = 0.0) {
  double z = simpson(w, lo, hi) + atom0;
  double m1 = simpson([&](double x) { return x * w(x); }, lo, hi) / z;
  double m2 = simpson([&](double x) { return x * x * w(x); }, lo, hi) / z;
  return {m1, m2 - m1 * m1};
}

MatrixFactorization small_factorization(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  Rng r(seed);
  return sample_rri_matrix(m, n, SingularValueLaw::uniform(3.0), MatrixMode::orthogonally_invariant, r);
}

}  // namespace

TEST(PriorPosterior, GaussianClosedForm) {
  PriorSpec p = PriorSpec::gaussian(2.0);
  for (double r : {-3.0, 0.0, 0.7}) {
    for (double g : {0.1, 1.0, 30.0}) {
      auto sp = prior_posterior(r, g, p);
      EXPECT_NEAR(sp.mean, g * 2.0 * r / (g * 2.0 + 1.0), 1e-13);
      EXPECT_NEAR(sp.deriv, g * 2.0 / (g * 2.0 + 1.0), 1e-13);
    }
  }
}

TEST(PriorPosterior, BernoulliGaussianMatchesNumericalIntegration) {
  const double rho = 0.1, tau = 1.5;
  PriorSpec p = PriorSpec::bernoulli_gaussian(rho, tau);
  for (double r : {-4.0, -0.3, 0.0, 0.8, 2.5}) {
    for (double g : {0.5, 4.0, 100.0}) {
      auto lik = [&](double x) { return gauss(r, x, 1.0 / g); };
      Moments m = posterior_numeric([&](double x) { return rho * gauss(x, 0.0, tau) * lik(x); }, -15.0, 15.0,
                                    (1.0 - rho) * lik(0.0));
      auto sp = prior_posterior(r, g, p);
      EXPECT_NEAR(sp.mean, m.mean, 1e-9) << r << " " << g;
      // d/dr E[X|r] = gamma Var[X|r]
      EXPECT_NEAR(sp.deriv, g * m.var, 1e-8) << r << " " << g;
    }
  }
}

TEST(PriorPosterior, GridPriorOfGaussianDensityMatchesClosedForm) {
  PriorSpec p = PriorSpec::grid_from_function(1.0, [](double x) { return std::exp(-0.5 * x * x); });
  for (double r : {-2.0, 0.4, 1.3}) {
    auto sp = prior_posterior(r, 2.0, p);
    EXPECT_NEAR(sp.mean, 2.0 * r / 3.0, 1e-6);
    EXPECT_NEAR(sp.deriv, 2.0 / 3.0, 1e-6);
  }
}

TEST(PriorPosterior, GridPriorRejectsBadDensity) {
  std::vector<double> d(PriorSpec::kGridPoints, 1.0);
  EXPECT_THROW(PriorSpec::grid(1.0, d), Error);
  EXPECT_THROW(PriorSpec::grid(1.0, std::vector<double>(5, 0.2)), Error);
}

TEST(ChannelPosterior, AwgnClosedForm) {
  ChannelSpec c = ChannelSpec::awgn(0.25);
  auto sp = channel_posterior(1.0, 2.0, 3.0, c);
  EXPECT_NEAR(sp.mean, (2.0 * 1.0 + 4.0 * 3.0) / 6.0, 1e-14);
  EXPECT_NEAR(sp.deriv, 2.0 / 6.0, 1e-14);
}

TEST(ChannelPosterior, ProbitMatchesNumericalIntegration) {
  ChannelSpec c = ChannelSpec::probit(0.05);
  for (double y : {-1.0, 1.0}) {
    for (double p : {-3.0, -0.2, 0.0, 1.1}) {
      for (double t : {0.3, 2.0, 50.0}) {
        auto w = [&](double z) { return gauss(z, p, 1.0 / t) * normal_cdf(y * z / std::sqrt(c.tau_w)); };
        double sd = 1.0 / std::sqrt(t);
        Moments m = posterior_numeric(w, p - 12.0 * sd, p + 12.0 * sd);
        auto sp = channel_posterior(p, t, y, c);
        EXPECT_NEAR(sp.mean, m.mean, 1e-9 * (1.0 + std::abs(m.mean)));
        EXPECT_NEAR(sp.deriv, t * m.var, 1e-8);
      }
    }
  }
}

TEST(ChannelPosterior, ProbitStableInFarTail) {
  ChannelSpec c = ChannelSpec::probit(0.01);
  auto sp = channel_posterior(-40.0, 1.0, 1.0, c);
  EXPECT_TRUE(std::isfinite(sp.mean));
  EXPECT_TRUE(std::isfinite(sp.deriv));
  EXPECT_GT(sp.mean, -1.0);
}

TEST(Special, InverseMillsAndErfcx) {
  EXPECT_NEAR(inv_mills(0.0), normal_pdf(0.0) / 0.5, 1e-15);
  EXPECT_NEAR(inv_mills(-50.0), 50.0 + 1.0 / 50.0, 1e-3);
  EXPECT_NEAR(erfcx(0.0), 1.0, 1e-15);
  EXPECT_NEAR(erfcx(30.0), 1.0 / (30.0 * std::sqrt(M_PI)) * (1.0 - 1.0 / 1800.0), 1e-7);
}

TEST(Divergence, PriorDenoisersMatchFiniteDifferences) {
  Rng rng(31);
  std::vector<PriorSpec> priors{PriorSpec::gaussian(1.0), PriorSpec::bernoulli_gaussian(0.1, 1.0),
                                PriorSpec::grid_from_function(1.0, [](double x) { return std::exp(-std::abs(x)); })};
  for (const auto& prior : priors) {
    Eigen::VectorXd r = rng.normal_vector(50, 1.5);
    double g = 3.0;
    auto f = [&](const Eigen::VectorXd& x) { return denoise_prior(x, g, prior).value; };
    EXPECT_NEAR(denoise_prior(r, g, prior).divergence, finite_difference_divergence(f, r, 1e-5), 1e-6);
  }
}

TEST(Divergence, OutputDenoisersMatchFiniteDifferences) {
  Rng rng(32);
  Eigen::VectorXd p = rng.normal_vector(40);
  Eigen::VectorXd y = rng.normal_vector(40);
  Eigen::VectorXd s = y.array().sign().matrix();
  for (auto [c, obs] : {std::pair{ChannelSpec::awgn(0.1), y}, std::pair{ChannelSpec::probit(0.1), s}}) {
    auto f = [&](const Eigen::VectorXd& x) { return denoise_output(x, 2.0, obs, c).value; };
    EXPECT_NEAR(denoise_output(p, 2.0, obs, c).divergence, finite_difference_divergence(f, p, 1e-5), 1e-6);
  }
}

TEST(Lmmse, MatchesDenseSolve) {
  MatrixFactorization fac = small_factorization(32, 64, 41);
  Eigen::MatrixXd a = materialize(fac);
  Rng rng(42);
  Eigen::VectorXd y = rng.normal_vector(32), r = rng.normal_vector(64);
  const double gw = 7.0, g2 = 0.6;
  Eigen::MatrixXd h = gw * a.transpose() * a + g2 * Eigen::MatrixXd::Identity(64, 64);
  Eigen::MatrixXd hinv = h.inverse();
  Eigen::VectorXd expect = hinv * (gw * a.transpose() * y + g2 * r);
  DenoiserOutput out = lmmse_denoise(r, g2, fac, y, gw);
  EXPECT_LT((out.value - expect).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(out.divergence, g2 * hinv.trace() / 64.0, 1e-12);
  LmmseDenoiser cached(fac, y, gw);
  EXPECT_LT((cached(r, g2).value - out.value).cwiseAbs().maxCoeff(), 1e-14);
  auto f = [&](const Eigen::VectorXd& x) { return cached(x, g2).value; };
  EXPECT_NEAR(out.divergence, finite_difference_divergence(f, r, 1e-4), 1e-8);
}

TEST(JointLmmse, MatchesDenseSolve) {
  MatrixFactorization fac = small_factorization(32, 64, 43);
  Eigen::MatrixXd a = materialize(fac);
  Rng rng(44);
  Eigen::VectorXd r2 = rng.normal_vector(64), p2 = rng.normal_vector(32);
  const double g2 = 0.8, t2 = 3.0;
  Eigen::MatrixXd hinv = (t2 * a.transpose() * a + g2 * Eigen::MatrixXd::Identity(64, 64)).inverse();
  Eigen::VectorXd x = hinv * (t2 * a.transpose() * p2 + g2 * r2);
  JointLmmseOutput out = joint_lmmse_denoise(r2, p2, g2, t2, fac);
  EXPECT_LT((out.x_hat - x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((out.z_hat - a * x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(out.alpha2, g2 * hinv.trace() / 64.0, 1e-10);
  EXPECT_NEAR(out.beta2, t2 * (a * hinv * a.transpose()).trace() / 32.0, 1e-10);
}

TEST(JointLmmse, DivergencesMatchFiniteDifferences) {
  MatrixFactorization fac = small_factorization(20, 30, 45);
  Rng rng(46);
  Eigen::VectorXd r2 = rng.normal_vector(30), p2 = rng.normal_vector(20);
  JointLmmseOutput out = joint_lmmse_denoise(r2, p2, 1.3, 0.7, fac);
  auto fx = [&](const Eigen::VectorXd& r) { return joint_lmmse_denoise(r, p2, 1.3, 0.7, fac).x_hat; };
  auto fz = [&](const Eigen::VectorXd& p) { return joint_lmmse_denoise(r2, p, 1.3, 0.7, fac).z_hat; };
  EXPECT_NEAR(out.alpha2, finite_difference_divergence(fx, r2, 1e-4), 1e-8);
  EXPECT_NEAR(out.beta2, finite_difference_divergence(fz, p2, 1e-4), 1e-8);
}

TEST(Denoisers, RejectNonPositivePrecision) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(denoise_prior(r, 0.0, PriorSpec::gaussian(1.0)), Error);
  EXPECT_THROW(denoise_output(r, -1.0, r, ChannelSpec::awgn(1.0)), Error);
  MatrixFactorization fac = small_factorization(3, 5, 47);
  EXPECT_THROW(lmmse_denoise(Eigen::VectorXd::Zero(5), 1.0, fac, Eigen::VectorXd::Zero(4), 1.0), Error);
}
