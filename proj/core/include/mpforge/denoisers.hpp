#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mpforge/ensembles.hpp"
#include "mpforge/rng.hpp"

namespace mpforge {

enum class PriorKind { gaussian, bernoulli_gaussian, grid };

std::string_view to_string(PriorKind kind) noexcept;
PriorKind prior_kind_from_string(std::string_view name);

/// i.i.d. signal prior.
///   gaussian:           N(0, tau_x)
///   bernoulli_gaussian: 0 w.p. 1 - rho, else N(0, tau_x)
///   grid:               density tabulated on kGridPoints equispaced points over
///                       [-10 sqrt(tau_x), 10 sqrt(tau_x)], trapezoid-normalized
struct PriorSpec {
  static constexpr int kGridPoints = 2001;

  PriorKind kind = PriorKind::gaussian;
  double tau_x = 1.0;
  double rho = 1.0;
  std::vector<double> density;  // grid only

  static PriorSpec gaussian(double tau_x);
  static PriorSpec bernoulli_gaussian(double rho, double tau_x);
  /// `density` holds kGridPoints values; must integrate to 1 within 1e-8.
  static PriorSpec grid(double tau_x, std::vector<double> density);
  /// Tabulates `f` on the grid and normalizes it.
  static PriorSpec grid_from_function(double tau_x, const std::function<double(double)>& f);

  void validate() const;
  double grid_step() const;
  double grid_point(int j) const;
  /// Trapezoid quadrature weight times density at grid point j (sums to 1).
  double grid_mass(int j) const;

  double second_moment() const;
  double sample(Rng& rng) const;
};

enum class ChannelKind { awgn, probit };

std::string_view to_string(ChannelKind kind) noexcept;
ChannelKind channel_kind_from_string(std::string_view name);

/// Output channel y = h(z, w), w ~ N(0, tau_w).
///   awgn:   y = z + w
///   probit: y = sign(z + w)
struct ChannelSpec {
  ChannelKind kind = ChannelKind::awgn;
  double tau_w = 0.01;

  static ChannelSpec awgn(double tau_w);
  static ChannelSpec probit(double tau_w);

  void validate() const;
  double observe(double z, double w) const;
};

/// Posterior mean and its derivative with respect to the pseudo-observation.
struct ScalarPosterior {
  double mean;
  double deriv;
};

/// E[X | X + N(0, 1/gamma) = r] for X ~ prior.
ScalarPosterior prior_posterior(double r, double gamma, const PriorSpec& prior);

/// E[Z | Z ~ N(p, 1/tau1), y] under the channel.
ScalarPosterior channel_posterior(double p, double tau1, double y, const ChannelSpec& channel);

struct DenoiserOutput {
  Eigen::VectorXd value;
  double divergence = 0.0;  // average of per-component derivatives
};

DenoiserOutput denoise_prior(const Eigen::VectorXd& r, double gamma1, const PriorSpec& prior);
DenoiserOutput denoise_output(const Eigen::VectorXd& p, double tau1, const Eigen::VectorXd& y,
                              const ChannelSpec& channel);

/// g2(r, gamma2) = (gamma_w A^T A + gamma2 I)^{-1} (gamma_w A^T y + gamma2 r) solved in the V basis.
/// Caches U^T y across calls.
class LmmseDenoiser {
 public:
  LmmseDenoiser(const MatrixFactorization& fac, const Eigen::VectorXd& y, double gamma_w);
  DenoiserOutput operator()(const Eigen::VectorXd& r2, double gamma2) const;

 private:
  const MatrixFactorization* fac_;
  Eigen::VectorXd sy_;  // gamma_w * S^T U^T y, length N
  Eigen::VectorXd s2_;  // padded s^2, length N
  double gamma_w_;
};

DenoiserOutput lmmse_denoise(const Eigen::VectorXd& r2, double gamma2, const MatrixFactorization& fac,
                             const Eigen::VectorXd& y, double gamma_w);

struct JointLmmseOutput {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd z_hat;
  double alpha2 = 0.0;
  double beta2 = 0.0;
};

JointLmmseOutput joint_lmmse_denoise(const Eigen::VectorXd& r2, const Eigen::VectorXd& p2, double gamma2, double tau2,
                                     const MatrixFactorization& fac);

/// (1/n) sum_i [f(x + h e_i)_i - f(x - h e_i)_i] / (2h).
double finite_difference_divergence(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h);

}  // namespace mpforge
