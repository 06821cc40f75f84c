#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mpforge/rng.hpp"

namespace mpforge {

enum class SvLawKind { uniform, two_point, constant, geometric };

std::string_view to_string(SvLawKind kind) noexcept;
SvLawKind sv_law_kind_from_string(std::string_view name);

/// Law of the nonzero-row singular values s_1..s_M.
///   uniform:   U(0, s_max)
///   two_point: `value` with probability `mass`, else 0
///   constant:  `value`
///   geometric: s_max * kappa^{-t}, t on an even grid in [0,1]; max/min = kappa exactly.
///              Its limiting law is log-uniform on [s_max/kappa, s_max].
struct SingularValueLaw {
  SvLawKind kind = SvLawKind::uniform;
  double s_max = 4.0;
  double value = 1.0;
  double mass = 1.0;
  double kappa = 10.0;

  static SingularValueLaw uniform(double s_max = 4.0);
  static SingularValueLaw two_point(double value, double mass);
  static SingularValueLaw constant(double value);
  static SingularValueLaw geometric(double kappa, double s_max = 4.0);

  /// Largest value in the support.
  double support_max() const;
  void validate() const;
  /// E[f(S)] under the limiting law (exact for atoms, adaptive quadrature otherwise).
  double expect(const std::function<double(double)>& f) const;
  double second_moment() const;
  /// One draw from the limiting law (geometric draws log-uniformly).
  double sample(Rng& rng) const;
};

/// Orthogonal n x n matrix. Haar samples are kept as a product of Householder
/// reflectors and a diagonal sign matrix; O(n^2) storage and O(n^2) mat-vec.
class OrthogonalMatrix {
 public:
  OrthogonalMatrix() = default;
  static OrthogonalMatrix identity(Eigen::Index n);
  static OrthogonalMatrix from_dense(Eigen::MatrixXd q);
  /// reflectors: block k (length n-k) holds a unit vector; Q = H_0 ... H_{n-1} diag(signs).
  static OrthogonalMatrix from_reflectors(Eigen::Index n, std::vector<double> reflectors, Eigen::VectorXd signs);

  Eigen::Index size() const noexcept { return n_; }
  bool is_identity() const noexcept { return rep_ == Rep::identity; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd dense() const;

  bool operator==(const OrthogonalMatrix& other) const;

 private:
  enum class Rep { identity, dense, reflectors };
  void apply_inplace(double* x) const;
  void apply_transpose_inplace(double* x) const;

  Rep rep_ = Rep::identity;
  Eigen::Index n_ = 0;
  Eigen::MatrixXd dense_;
  std::vector<double> reflectors_;
  Eigen::VectorXd signs_;
};

/// Haar-distributed orthogonal matrix: Householder QR of an i.i.d. N(0,1) matrix
/// with the sign(R_jj) column correction, generated column by column.
OrthogonalMatrix sample_haar(Eigen::Index n, Rng& rng);

/// Same distribution via a dense Householder QR of a full Gaussian matrix (O(n^3)).
OrthogonalMatrix sample_haar_dense_qr(Eigen::Index n, Rng& rng);

Eigen::VectorXd sample_singular_values(const SingularValueLaw& law, Eigen::Index m, Rng& rng);

enum class MatrixMode { orthogonally_invariant, right_invariant_only };

std::string_view to_string(MatrixMode mode) noexcept;
MatrixMode matrix_mode_from_string(std::string_view name);

/// A = U diag(s) V^T with U (M x M), V (N x N), s (M).
struct MatrixFactorization {
  OrthogonalMatrix u;
  OrthogonalMatrix v;
  Eigen::VectorXd s;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  double delta = 1.0;
  double s_max = 4.0;

  /// s padded with zeros to length N.
  Eigen::VectorXd s_padded() const;
};

MatrixFactorization make_factorization(OrthogonalMatrix u, Eigen::VectorXd s, OrthogonalMatrix v, double s_max);

MatrixFactorization sample_rri_matrix(Eigen::Index m, Eigen::Index n, const SingularValueLaw& law, MatrixMode mode,
                                      Rng& rng);

Eigen::VectorXd apply(const MatrixFactorization& fac, const Eigen::VectorXd& x);
Eigen::VectorXd apply_transpose(const MatrixFactorization& fac, const Eigen::VectorXd& y);
Eigen::MatrixXd materialize(const MatrixFactorization& fac);

/// max |Q^T Q - I| entrywise.
double orthogonality_error(const OrthogonalMatrix& q);

/// Binary layout: "MPF1", m (u64 LE), n (u64 LE), s[m], U (m*m, column-major), V (n*n, column-major), all f64 LE.
void write_factorization(const MatrixFactorization& fac, const std::string& path);
MatrixFactorization read_factorization(const std::string& path);

}  // namespace mpforge
