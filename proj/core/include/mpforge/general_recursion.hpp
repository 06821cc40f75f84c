#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpforge/denoisers.hpp"
#include "mpforge/ensembles.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/solvers.hpp"

namespace mpforge {

using Vec2 = std::array<double, 2>;

/// One row of a separable map: values and the diagonal derivatives used for divergences.
struct RowEval {
  Vec2 value{};
  Vec2 deriv{};
};

/// f(p_in row, p_out row, w row, gamma_out, gamma_in). In-side maps differentiate against
/// p_in, out-side maps against p_out. Rows past M of an M-row argument are passed as zeros.
using RowMap = std::function<RowEval(const Vec2& a_in, const Vec2& a_out, const Vec2& w, const Vec2& gamma_out,
                                     const Vec2& gamma_in)>;
using ParamUpdate = std::function<Vec2(const Vec2& gamma, const Vec2& alpha)>;

struct GeneralInputs {
  int d = 2;  // iterate columns, 1 or 2
  std::shared_ptr<const OrthogonalMatrix> v;
  std::shared_ptr<const OrthogonalMatrix> u;  // unused by the VAMP recursion
  Eigen::MatrixXd u0_in;   // N x d
  Eigen::MatrixXd u0_out;  // M x d
  Vec2 gamma_p0_in{1.0, 1.0};
  Vec2 gamma_p0_out{1.0, 1.0};
  Eigen::MatrixXd w_p_in, w_p_out, w_q_in, w_q_out;  // rows x L, L <= 2
  RowMap f_p_in, f_p_out, f_q_in, f_q_out;
  ParamUpdate gamma_q_in, gamma_q_out, gamma_p_in, gamma_p_out;
  std::function<double(double)> clip_alpha;  // applied to column-1 divergences; identity if empty
};

/// Iterates of iteration k. u_in/u_out are the inputs u_k of that iteration.
struct GeneralState {
  int k = 0;
  Eigen::MatrixXd u_in, p_in, v_in, q_in;
  Eigen::MatrixXd u_out, p_out, v_out, q_out;
  Vec2 alpha_p_in{}, alpha_p_out{}, alpha_q_in{}, alpha_q_out{};
  Vec2 gamma_p_in{}, gamma_p_out{}, gamma_q_in{}, gamma_q_out{};
};

std::vector<GeneralState> run_general_gvamp(const GeneralInputs& in, int iterations);
/// Input-only recursion: uses v, u0_in, w_p_in, w_q_in, f_p_in, f_q_in, gamma_q_in, gamma_p_in.
std::vector<GeneralState> run_general_vamp(const GeneralInputs& in, int iterations);

/// Gamma(gamma, alpha) = (clip(gamma_1 (1 - alpha_1) / alpha_1), 1).
Vec2 translated_gamma_update(const Vec2& gamma, const Vec2& alpha, const SolverConfig& cfg);

/// General-recursion inputs reproducing run_gvamp on `inst` (d = 2 layout: column 1 tracks the
/// algorithm, column 2 carries x0 / z0). Holds references into `inst`, which must outlive it.
GeneralInputs translate_gvamp(const ProblemInstance& inst, const PriorSpec& prior, const ChannelSpec& channel,
                              const SolverConfig& cfg);

/// d = 1 inputs reproducing run_vamp in error coordinates: p_k = r1k - x0, v_k = r2k - x0.
GeneralInputs translate_vamp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg);

struct DiscrepancyRow {
  int k = 0;
  // max |a - b| / max(|b|, |x0| or |z0|) per family, infinity norms
  double r1 = 0.0, r2 = 0.0, p1 = 0.0, p2 = 0.0;
  double scalars = 0.0;
};

struct TranslationReport {
  std::string algorithm;
  int iterations = 0;
  double tolerance = 1e-8;
  std::vector<DiscrepancyRow> rows;
  double max_discrepancy = 0.0;
  double column2_error = 0.0;  // max |v_in[:,2] - x0| and |p_out[:,2] - z0|
  bool pass = false;
};

/// Runs the solver and the translated recursion from the same start and compares them.
TranslationReport check_translation_equivalence(const ProblemInstance& inst, const PriorSpec& prior,
                                                const ChannelSpec& channel, const SolverConfig& cfg, int iterations);
TranslationReport check_translation_equivalence_vamp(const ProblemInstance& inst, const PriorSpec& prior,
                                                     const SolverConfig& cfg, int iterations);

}  // namespace mpforge
