#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mpforge/denoisers.hpp"
#include "mpforge/problem.hpp"

namespace mpforge {

/// How r_10 (and p_10 for GVAMP) are drawn.
///   error_haar: r_10 = x0 + V r_init, p_10 = z0 + U p_init  (error is rotation-coupled, as the
///               limiting analysis requires; sigma^2_10 = init_variance)
///   haar:       r_10 = V r_init, p_10 = U p_init  (literal; sigma^2_10 = init_variance + E[X0^2])
enum class InitMode { error_haar, haar };

/// AMP start: standard uses x_{-1} = 0, v_{-1} = y; ones uses x_{-1} = v_{-1} = 1.
enum class AmpInit { standard, ones };

enum class KeepPolicy { every, final_only, none };

std::string_view to_string(InitMode mode) noexcept;
InitMode init_mode_from_string(std::string_view name);

struct SolverConfig {
  int max_iters = 30;
  double t_min = 1e-3;
  double t_max = 1.0 - 1e-3;
  double gamma_min = 1e-8;
  double gamma_max = 1e8;
  double tau_min = 1e-8;
  double tau_max = 1e8;
  double stop_eps1 = 0.0;  // stop when 1/gamma1 < eps1 (0 disables)
  double stop_eps2 = 0.0;  // stop when 1/gamma2 < eps2 (0 disables)
  double stop_change_eps = 1e-8;  // on ||x1_k - x1_{k-1}||^2 / N (0 disables)
  double gamma10 = 1.0;
  double tau10 = 1.0;
  InitMode init = InitMode::error_haar;
  double init_variance = 1.0;
  std::uint64_t init_seed = 0;
  AmpInit amp_init = AmpInit::standard;
  KeepPolicy keep_x_hat = KeepPolicy::every;
  bool keep_iterates = false;  // r1/r2/p1/p2 per iteration

  void validate() const;
  double clip_alpha(double a) const;
  double clip_gamma(double g) const;
  double clip_tau(double t) const;
};

enum class Termination { max_iters, gamma_threshold, change_threshold };
std::string_view to_string(Termination t) noexcept;

/// Scalars of one iteration. Fields that an algorithm does not define are NaN.
struct IterationRecord {
  int k = 0;
  double gamma1, gamma2, tau1, tau2;
  double alpha1, alpha2, beta1, beta2;
  double eta1, eta2;
  double mse_x1;  // ||x1_k - x0||^2 / N
  double mse_x2;
  double mse_z1;  // ||z1_k - z0||^2 / M
};

struct IterateSnapshot {
  Eigen::VectorXd r1, r2, p1, p2;
};

struct SolverTrace {
  std::string algorithm;
  std::vector<IterationRecord> records;
  std::vector<Eigen::VectorXd> x_hat;        // x1_k, per keep policy
  std::vector<IterateSnapshot> iterates;     // when keep_iterates
  Eigen::VectorXd final_x_hat;
  Termination termination = Termination::max_iters;
  int alpha_warnings = 0;  // raw divergence outside (0, 1) before clipping
  int clip_events = 0;     // any scalar changed by clipping

  int iterations() const noexcept { return static_cast<int>(records.size()); }
};

SolverTrace run_amp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg);
SolverTrace run_vamp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg);
SolverTrace run_gvamp(const ProblemInstance& inst, const PriorSpec& prior, const ChannelSpec& channel,
                      const SolverConfig& cfg);

/// Initial r_10 / p_10 as used by run_vamp / run_gvamp under cfg.
Eigen::VectorXd initial_r1(const ProblemInstance& inst, const SolverConfig& cfg);
Eigen::VectorXd initial_p1(const ProblemInstance& inst, const SolverConfig& cfg);

/// init_seed for trial t under a top-level seed (key of stream "trial/<t>/init").
std::uint64_t trial_init_seed(std::uint64_t seed, std::size_t trial);

}  // namespace mpforge
