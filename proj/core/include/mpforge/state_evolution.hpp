#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mpforge/denoisers.hpp"
#include "mpforge/ensembles.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/solvers.hpp"

namespace mpforge {

/// Limiting scalars of one iteration. Undefined fields are NaN.
struct SEStep {
  int k = 0;
  double alpha1, alpha2, beta1, beta2;
  double gamma1, gamma2, tau1, tau2;
  double sigma2_1, sigma2_2, rho2_1, rho2_2;
  double mse_pred;  // limit of ||x1_k - x0||^2 / N
  double mse_x2;
  double mse_z1;
  // Error-truth correlations E[(R1 - X0) X0], E[(R2 - X0) X0], E[(P1 - Z0) Z0], E[(P2 - Z0) Z0].
  double cx1, cx2, cz1, cz2;
};

SEStep blank_se_step(int k);

struct SETrajectory {
  std::string engine;
  std::vector<SEStep> steps;
  std::vector<SEStep> stderr_steps;  // Monte Carlo standard errors; empty for quadrature engines
  int clip_events = 0;
  std::vector<std::string> warnings;

  int iterations() const noexcept { return static_cast<int>(steps.size()); }
  bool has_stderr() const noexcept { return !stderr_steps.empty(); }
};

struct SEInit {
  double gamma10 = 1.0;
  double tau10 = 1.0;
  double sigma2_10 = 1.0;
  double rho2_10 = 1.0;
  double cx10 = 0.0;  // E[(R10 - X0) X0]
  double cz10 = 0.0;  // E[(P10 - Z0) Z0]
};

/// Initial SE state matching what run_vamp / run_gvamp draw under cfg.
SEInit se_init(const ModelSpec& model, const SolverConfig& cfg);

/// E[Z0^2] for z0 = A x0.
double output_second_moment(const ModelSpec& model);

struct ScalarMoments {
  double sensitivity;  // A
  double error;        // E
  double cross = 0.0;  // E[(g - X0) X0]; filled by the coupled variants only
};

/// A_x1, E_x1 with R1 ~ N(X0, sigma1_sq) and g_x1 the prior's MMSE denoiser.
ScalarMoments input_moments(double gamma1, double sigma1_sq, const PriorSpec& prior, int nodes = 64);
double sensitivity_input(double gamma1, double sigma1_sq, const PriorSpec& prior);
double error_input(double gamma1, double sigma1_sq, const PriorSpec& prior);

/// A_z1, E_z1 with P1 ~ N(Z0, rho1_sq), Z0 ~ N(0, z0_var), y = h(Z0, W).
ScalarMoments output_moments(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var, int nodes = 64);
double sensitivity_output(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var);
double error_output(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var);

/// Coupled inputs: R1 = kappa X0 + N(0, noise_var) and P1 = kappa Z0 + N(0, noise_var).
/// kappa = 1 gives the uncoupled functions above. Also returns the cross moment.
ScalarMoments input_moments_coupled(double gamma1, double kappa, double noise_var, const PriorSpec& prior,
                                    int nodes = 64);
ScalarMoments output_moments_coupled(double tau1, double kappa, double noise_var, const ChannelSpec& channel,
                                     double z0_var, int nodes = 64);

/// E[phi(g_x1(R, gamma), X0)] where R - X0 has variance sigma_sq and E[(R - X0) X0] = cross.
double expect_denoised(const PriorSpec& prior, double gamma, double sigma_sq,
                       const std::function<double(double, double)>& phi, int nodes = 64, double cross = 0.0);

/// (A_x2, A_z2): A_x2 averages over delta*law + (1-delta)*point mass at 0; A_z2 over the law.
std::pair<double, double> trace_limit_sensitivities(double gamma2, double tau2, const SingularValueLaw& law,
                                                    double delta);

/// Joint-LMMSE error limits, argument order (gamma2, tau2, sigma2_2, rho2_2).
double error_x2(double gamma2, double tau2, double sigma2_2, double rho2_2, const SingularValueLaw& law, double delta);
double error_z2(double gamma2, double tau2, double sigma2_2, double rho2_2, const SingularValueLaw& law);

/// VAMP LMMSE stage with known noise precision gamma_w.
double lmmse_sensitivity(double gamma2, double gamma_w, const SingularValueLaw& law, double delta);
double lmmse_error(double gamma2, double sigma2_2, double gamma_w, const SingularValueLaw& law, double delta);

struct SEOptions {
  int nodes = 64;
  bool check_doubling = true;  // recompute nonlinear expectations at 2x nodes, warn on > 1e-6 change
  /// Drop the error-truth correlations and treat every message as truth plus independent noise.
  /// Exact for linear channels with the error_haar start; off for probit from k = 1 on.
  bool literal = false;
};

SETrajectory run_se_vamp(const ModelSpec& model, const SEInit& init, int iterations, const SolverConfig& clips,
                         const SEOptions& opts = {});
SETrajectory run_se_gvamp(const ModelSpec& model, const SEInit& init, int iterations, const SolverConfig& clips,
                          const SEOptions& opts = {});
/// AMP on an i.i.d. N(0, 1/M) design with the standard start.
SETrajectory run_se_amp(const ModelSpec& model, int iterations, const SolverConfig& clips, const SEOptions& opts = {});

}  // namespace mpforge
