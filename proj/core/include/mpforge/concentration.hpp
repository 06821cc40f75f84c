#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpforge/general_se.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/rng.hpp"
#include "mpforge/solvers.hpp"
#include "mpforge/state_evolution.hpp"

namespace mpforge {

/// estimate: phi(x_hat_k[i], x0[i]). iterate: phi(e_k[i], e_{k-lag}[i]) with e_k = r1_k - x0.
enum class FunctionalArity { estimate, iterate };

struct PredictionContext {
  const ModelSpec& model;
  const SETrajectory& se;
  const GaussianProcessModel* gp;  // set when any iterate functional is requested
  SEOptions se_opts;
};

struct Pl2Functional {
  std::string name;
  FunctionalArity arity = FunctionalArity::estimate;
  int lag = 0;
  std::function<double(double, double)> phi;
  /// Limit of the empirical average at iteration k.
  std::function<double(const PredictionContext&, int k)> predict;
};

/// squared_error, product, second_moment (estimate) and iterate_second, iterate_lag1 (iterate).
std::vector<Pl2Functional> builtin_functionals();
const Pl2Functional& find_functional(const std::vector<Pl2Functional>& all, const std::string& name);

/// (1/N) sum_i phi(a_i, b_i).
double empirical_average(const Pl2Functional& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Value of `f` at iteration k of a solver trace. estimate functionals need x_hat kept every
/// iteration, iterate functionals need keep_iterates. NaN when k < lag.
double evaluate_on_trace(const Pl2Functional& f, const SolverTrace& trace, const ProblemInstance& inst, int k);

/// Largest observed |phi(v) - phi(v')| / (|v - v'| (1 + |v| + |v'|)) over random pairs.
double estimate_pl2_constant(const Pl2Functional& f, Rng& rng, int samples = 10000, double scale = 3.0);

struct HarnessConfig {
  ModelSpec model;
  std::string algorithm = "vamp";  // amp | vamp | gvamp
  std::vector<Eigen::Index> sizes{256};
  int trials = 200;
  int iterations = 6;  // records for k = 0 .. iterations-1
  SolverConfig solver;
  std::vector<std::string> functionals{"squared_error"};
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware concurrency
  SEOptions se_opts;
  GeneralSeOptions gp_opts;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  Eigen::Index n = 0;
  int k = 0;
  std::string functional;
  double empirical = 0.0;
  double prediction = 0.0;
  double deviation = 0.0;
};

/// Prediction trajectory used by run_trials; throws invalid-config if the SE cannot be computed.
SETrajectory harness_state_evolution(const HarnessConfig& cfg);

/// Records are ordered by (size, trial, k, functional) regardless of worker count.
std::vector<TrialRecord> run_trials(const HarnessConfig& cfg);

/// One solver run as the harness performs it (for transparency checks).
SolverTrace run_harness_trial(const HarnessConfig& cfg, Eigen::Index n, std::size_t trial, ProblemInstance& inst);

struct DeviationRow {
  Eigen::Index n = 0;
  int k = 0;
  std::string functional;
  std::size_t count = 0;
  double median = 0.0, mean = 0.0;
  double q10 = 0.0, q25 = 0.0, q75 = 0.0, q90 = 0.0;
  std::vector<double> tail;  // P(deviation >= eps) per summary epsilon
  std::optional<double> slope;  // d log(median) / d log N over all sizes of (k, functional)
};

struct DeviationSummary {
  std::vector<double> epsilons;
  std::vector<DeviationRow> rows;
  std::vector<std::string> notices;
};

inline const std::vector<double> kDefaultEpsilons{0.01, 0.02, 0.05, 0.1};

DeviationSummary summarize(const std::vector<TrialRecord>& records,
                           const std::vector<double>& epsilons = kDefaultEpsilons);

struct TailRow {
  Eigen::Index n = 0;
  int k = 0;
  std::string functional;
  std::size_t trials = 0;
  double frequency = 0.0;
  bool increase_flagged = false;  // rose from the previous size beyond binomial noise
};

std::vector<TailRow> tail_estimate(const std::vector<TrialRecord>& records, double epsilon);

/// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);
/// Least-squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mpforge
