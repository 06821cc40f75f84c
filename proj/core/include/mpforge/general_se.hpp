#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mpforge/denoisers.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/rng.hpp"
#include "mpforge/solvers.hpp"
#include "mpforge/state_evolution.hpp"

namespace mpforge {

enum class GeneralKind { gvamp, vamp };

/// The translated GVAMP (or VAMP) denoisers of the general recursion, written in
/// error coordinates with one column: f_p^in(p) = g_x1(x0 + p) - x0 and so on.
/// q-side rows are paired (s ~ law) or unpaired (s = 0, no output row).
struct GeneralSeModel {
  GeneralKind kind = GeneralKind::gvamp;
  ModelSpec model;
  double z0_var = 1.0;

  struct PDraw {
    double x0, z0, y;
  };
  struct QDraw {
    double s;
    double w;  // U^T w component (VAMP only)
  };

  static GeneralSeModel from(const ModelSpec& model, GeneralKind kind);

  PDraw draw_p(Rng& rng) const;
  QDraw draw_q(Rng& rng) const;

  ScalarPosterior f_p_in(double p, const PDraw& d, double gamma) const;
  ScalarPosterior f_p_out(double p, const PDraw& d, double tau) const;
  /// Paired-row maps. Unpaired rows of the input side return q_in with derivative 1.
  ScalarPosterior f_q_in(double q_in, double q_out, const QDraw& d, double gamma, double tau) const;
  ScalarPosterior f_q_out(double q_in, double q_out, const QDraw& d, double gamma, double tau) const;
};

struct GeneralSeOptions {
  std::size_t mc_samples = 200000;
  // run_se_general: one run on all mc_samples gives the estimate; replicates on mc_samples / replicates
  // each give its standard error. track_gaussian_process pools the replicates.
  int replicates = 20;
  std::uint64_t seed = 0;
  bool literal = false;  // as SEOptions::literal; track_gaussian_process ignores it
};

/// Monte Carlo evaluation of the general-recursion SE for the translated model.
/// Field mapping onto SEStep: alpha1/beta1 = in/out p-side divergences, alpha2/beta2 the
/// q-side ones; sigma2_1/rho2_1 = tau_p in/out; sigma2_2/rho2_2 = tau_q in/out; gamma1/tau1 =
/// p-side precisions, gamma2/tau2 = q-side. stderr_steps holds the standard errors of steps.
SETrajectory run_se_general(const GeneralSeModel& gm, const SEInit& init, int iterations, const SolverConfig& clips,
                            const GeneralSeOptions& opts = {});

struct GaussianProcessSide {
  Eigen::MatrixXd sigma_u;  // E[U_i U_j], i, j = 0..K (equals the P covariance)
  Eigen::MatrixXd sigma_v;  // E[V_i V_j] (equals the Q covariance)
  std::vector<Eigen::VectorXd> beta_p, beta_q;
  std::vector<double> rho_p, rho_q;
  std::vector<double> p_second, p_second_stderr;  // E[P_k^2]
  std::vector<double> q_second, q_second_stderr;  // E[Q_k^2]
};

struct GaussianProcessModel {
  int iterations = 0;
  GaussianProcessSide in;
  GaussianProcessSide out;  // GVAMP only
  bool has_out = false;
};

/// Simulates P_k, V_k, Q_k, U_{k+1} jointly using the SE's divergences and precisions.
/// Reported sigma matrices pool all replicates; beta and rho are derived from the pooled sigma.
GaussianProcessModel track_gaussian_process(const GeneralSeModel& gm, const SETrajectory& se, int iterations,
                                            const GeneralSeOptions& opts = {});

/// beta = S^{-1} b and rho = c - b^T S^{-1} b for the leading k x k block of `sigma`
/// against column k. Throws numeric-error if the block's condition number exceeds 1e12.
void regress_last(const Eigen::MatrixXd& sigma, int k, Eigen::VectorXd& beta, double& rho);

}  // namespace mpforge
