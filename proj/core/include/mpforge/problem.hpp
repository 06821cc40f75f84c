#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "mpforge/denoisers.hpp"
#include "mpforge/ensembles.hpp"

namespace mpforge {

/// Everything needed to generate a problem instance at any size N.
struct ModelSpec {
  PriorSpec prior = PriorSpec::gaussian(1.0);
  ChannelSpec channel = ChannelSpec::awgn(0.01);
  SingularValueLaw law = SingularValueLaw::uniform(4.0);
  double delta = 0.5;
  MatrixMode mode = MatrixMode::orthogonally_invariant;

  void validate() const;
  /// M for a given N: round(delta * N), at least 1.
  Eigen::Index rows_for(Eigen::Index n) const;
};

struct ProblemInstance {
  MatrixFactorization fac;               // valid unless only `dense` is set
  std::optional<Eigen::MatrixXd> dense;  // i.i.d. Gaussian design for AMP
  Eigen::VectorXd x0;
  Eigen::VectorXd w;
  Eigen::VectorXd y;
  Eigen::VectorXd z0;
  ChannelSpec channel;

  Eigen::Index n() const noexcept { return x0.size(); }
  Eigen::Index m() const noexcept { return y.size(); }
  bool factored() const noexcept { return fac.n > 0; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;
};

/// Builds y = h(A x0, w) from given pieces and checks consistency.
ProblemInstance make_instance(MatrixFactorization fac, Eigen::VectorXd x0, Eigen::VectorXd w,
                              const ChannelSpec& channel);

/// Fresh rotationally invariant instance for `trial`, using streams
/// "trial/<t>/matrix", "trial/<t>/signal", "trial/<t>/noise" under `seed`.
ProblemInstance sample_instance(const ModelSpec& model, Eigen::Index n, std::uint64_t seed, std::size_t trial);

/// Dense design with i.i.d. N(0, 1/M) entries (AMP reference model).
ProblemInstance sample_iid_gaussian_instance(const ModelSpec& model, Eigen::Index n, std::uint64_t seed,
                                             std::size_t trial);

}  // namespace mpforge
