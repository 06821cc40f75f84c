#include "mpforge/ensembles.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/QR>

#include "mpforge/error.hpp"
#include "mpforge/quadrature.hpp"

namespace mpforge {

std::string_view to_string(SvLawKind kind) noexcept {
  switch (kind) {
    case SvLawKind::uniform: return "uniform";
    case SvLawKind::two_point: return "two-point";
    case SvLawKind::constant: return "constant";
    case SvLawKind::geometric: return "geometric";
  }
  return "unknown";
}

SvLawKind sv_law_kind_from_string(std::string_view name) {
  if (name == "uniform") return SvLawKind::uniform;
  if (name == "two-point") return SvLawKind::two_point;
  if (name == "constant") return SvLawKind::constant;
  if (name == "geometric") return SvLawKind::geometric;
  fail(ErrorKind::invalid_config, "unsupported singular value law '" + std::string(name) + "'", "model.sv.kind");
}

SingularValueLaw SingularValueLaw::uniform(double s_max) {
  SingularValueLaw l;
  l.kind = SvLawKind::uniform;
  l.s_max = s_max;
  return l;
}

SingularValueLaw SingularValueLaw::two_point(double value, double mass) {
  SingularValueLaw l;
  l.kind = SvLawKind::two_point;
  l.value = value;
  l.mass = mass;
  l.s_max = value;
  return l;
}

SingularValueLaw SingularValueLaw::constant(double value) {
  SingularValueLaw l;
  l.kind = SvLawKind::constant;
  l.value = value;
  l.s_max = value;
  return l;
}

SingularValueLaw SingularValueLaw::geometric(double kappa, double s_max) {
  SingularValueLaw l;
  l.kind = SvLawKind::geometric;
  l.kappa = kappa;
  l.s_max = s_max;
  return l;
}

double SingularValueLaw::support_max() const {
  switch (kind) {
    case SvLawKind::uniform:
    case SvLawKind::geometric: return s_max;
    case SvLawKind::two_point:
    case SvLawKind::constant: return value;
  }
  return s_max;
}

void SingularValueLaw::validate() const {
  auto bad = [](const std::string& msg, const char* field) { fail(ErrorKind::invalid_config, msg, field); };
  switch (kind) {
    case SvLawKind::uniform:
      if (!(s_max > 0.0 && std::isfinite(s_max))) bad("uniform law needs 0 < s_max < inf", "model.sv.s_max");
      break;
    case SvLawKind::geometric:
      if (!(s_max > 0.0 && std::isfinite(s_max))) bad("geometric law needs 0 < s_max < inf", "model.sv.s_max");
      if (!(kappa >= 1.0 && std::isfinite(kappa))) bad("geometric law needs kappa >= 1", "model.sv.kappa");
      break;
    case SvLawKind::two_point:
      if (!(mass > 0.0 && mass <= 1.0)) bad("two-point law needs 0 < mass <= 1", "model.sv.mass");
      [[fallthrough]];
    case SvLawKind::constant:
      if (!(value >= 0.0 && std::isfinite(value))) bad("singular value must be finite and >= 0", "model.sv.value");
      break;
  }
}

double SingularValueLaw::expect(const std::function<double(double)>& f) const {
  switch (kind) {
    case SvLawKind::constant: return f(value);
    case SvLawKind::two_point: return mass * f(value) + (1.0 - mass) * f(0.0);
    case SvLawKind::uniform: return integrate(f, 0.0, s_max) / s_max;
    case SvLawKind::geometric: {
      if (kappa == 1.0) return f(s_max);
      double lk = std::log(kappa);
      double hi = std::log(s_max);
      return integrate([&](double t) { return f(std::exp(t)); }, hi - lk, hi) / lk;
    }
  }
  return 0.0;
}

double SingularValueLaw::second_moment() const {
  switch (kind) {
    case SvLawKind::constant: return value * value;
    case SvLawKind::two_point: return mass * value * value;
    case SvLawKind::uniform: return s_max * s_max / 3.0;
    case SvLawKind::geometric: {
      if (kappa == 1.0) return s_max * s_max;
      double lo = s_max / kappa;
      return (s_max * s_max - lo * lo) / (2.0 * std::log(kappa));
    }
  }
  return 0.0;
}

double SingularValueLaw::sample(Rng& rng) const {
  switch (kind) {
    case SvLawKind::constant: return value;
    case SvLawKind::two_point: return rng.bernoulli(mass) ? value : 0.0;
    case SvLawKind::uniform: return rng.uniform(0.0, s_max);
    case SvLawKind::geometric:
      if (kappa == 1.0) return s_max;
      return s_max * std::pow(kappa, -rng.uniform());
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

OrthogonalMatrix OrthogonalMatrix::identity(Eigen::Index n) {
  OrthogonalMatrix q;
  q.rep_ = Rep::identity;
  q.n_ = n;
  return q;
}

OrthogonalMatrix OrthogonalMatrix::from_dense(Eigen::MatrixXd m) {
  require(m.rows() == m.cols(), ErrorKind::invalid_dimension, "orthogonal matrix must be square");
  OrthogonalMatrix q;
  q.rep_ = Rep::dense;
  q.n_ = m.rows();
  q.dense_ = std::move(m);
  return q;
}

OrthogonalMatrix OrthogonalMatrix::from_reflectors(Eigen::Index n, std::vector<double> reflectors,
                                                   Eigen::VectorXd signs) {
  require(static_cast<Eigen::Index>(reflectors.size()) == n * (n + 1) / 2 && signs.size() == n,
          ErrorKind::invalid_dimension, "reflector storage does not match dimension");
  OrthogonalMatrix q;
  q.rep_ = Rep::reflectors;
  q.n_ = n;
  q.reflectors_ = std::move(reflectors);
  q.signs_ = std::move(signs);
  return q;
}

void OrthogonalMatrix::apply_inplace(double* x) const {
  // Q x = H_0 (H_1 (... H_{n-1} (D x)))
  Eigen::Map<Eigen::VectorXd> xv(x, n_);
  xv.array() *= signs_.array();
  std::size_t offset = reflectors_.size();
  for (Eigen::Index k = n_ - 1; k >= 0; --k) {
    Eigen::Index len = n_ - k;
    offset -= static_cast<std::size_t>(len);
    Eigen::Map<const Eigen::VectorXd> v(reflectors_.data() + offset, len);
    auto seg = xv.segment(k, len);
    double dot = v.dot(seg);
    seg.noalias() -= (2.0 * dot) * v;
  }
}

void OrthogonalMatrix::apply_transpose_inplace(double* x) const {
  // Q^T x = D H_{n-1} ... H_0 x
  Eigen::Map<Eigen::VectorXd> xv(x, n_);
  std::size_t offset = 0;
  for (Eigen::Index k = 0; k < n_; ++k) {
    Eigen::Index len = n_ - k;
    Eigen::Map<const Eigen::VectorXd> v(reflectors_.data() + offset, len);
    auto seg = xv.segment(k, len);
    double dot = v.dot(seg);
    seg.noalias() -= (2.0 * dot) * v;
    offset += static_cast<std::size_t>(len);
  }
  xv.array() *= signs_.array();
}

Eigen::VectorXd OrthogonalMatrix::apply(const Eigen::VectorXd& x) const {
  require(x.size() == n_, ErrorKind::invalid_dimension, "orthogonal apply: dimension mismatch");
  switch (rep_) {
    case Rep::identity: return x;
    case Rep::dense: return dense_ * x;
    case Rep::reflectors: {
      Eigen::VectorXd y = x;
      apply_inplace(y.data());
      return y;
    }
  }
  return x;
}

Eigen::VectorXd OrthogonalMatrix::apply_transpose(const Eigen::VectorXd& x) const {
  require(x.size() == n_, ErrorKind::invalid_dimension, "orthogonal apply_transpose: dimension mismatch");
  switch (rep_) {
    case Rep::identity: return x;
    case Rep::dense: return dense_.transpose() * x;
    case Rep::reflectors: {
      Eigen::VectorXd y = x;
      apply_transpose_inplace(y.data());
      return y;
    }
  }
  return x;
}

Eigen::MatrixXd OrthogonalMatrix::apply(const Eigen::MatrixXd& x) const {
  require(x.rows() == n_, ErrorKind::invalid_dimension, "orthogonal apply: dimension mismatch");
  if (rep_ == Rep::dense) return dense_ * x;
  Eigen::MatrixXd y = x;
  if (rep_ == Rep::reflectors)
    for (Eigen::Index c = 0; c < y.cols(); ++c) apply_inplace(y.col(c).data());
  return y;
}

Eigen::MatrixXd OrthogonalMatrix::apply_transpose(const Eigen::MatrixXd& x) const {
  require(x.rows() == n_, ErrorKind::invalid_dimension, "orthogonal apply_transpose: dimension mismatch");
  if (rep_ == Rep::dense) return dense_.transpose() * x;
  Eigen::MatrixXd y = x;
  if (rep_ == Rep::reflectors)
    for (Eigen::Index c = 0; c < y.cols(); ++c) apply_transpose_inplace(y.col(c).data());
  return y;
}

Eigen::MatrixXd OrthogonalMatrix::dense() const {
  switch (rep_) {
    case Rep::identity: return Eigen::MatrixXd::Identity(n_, n_);
    case Rep::dense: return dense_;
    case Rep::reflectors: return apply(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n_, n_)));
  }
  return {};
}

bool OrthogonalMatrix::operator==(const OrthogonalMatrix& other) const {
  if (rep_ != other.rep_ || n_ != other.n_) return false;
  switch (rep_) {
    case Rep::identity: return true;
    case Rep::dense: return dense_ == other.dense_;
    case Rep::reflectors: return reflectors_ == other.reflectors_ && signs_ == other.signs_;
  }
  return false;
}

OrthogonalMatrix sample_haar(Eigen::Index n, Rng& rng) {
  require(n >= 1, ErrorKind::invalid_dimension, "sample_haar: n must be >= 1");
  // Step k of Householder QR on an i.i.d. Gaussian matrix sees a trailing column that is
  // again i.i.d. Gaussian and independent of the earlier reflectors, so it is drawn fresh.
  std::vector<double> refl(static_cast<std::size_t>(n * (n + 1) / 2));
  Eigen::VectorXd signs(n);
  std::size_t offset = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index len = n - k;
    Eigen::Map<Eigen::VectorXd> v(refl.data() + offset, len);
    rng.fill_normal(v.data(), static_cast<std::size_t>(len));
    double x0 = v(0);
    double sgn = x0 >= 0.0 ? 1.0 : -1.0;
    double norm = v.norm();
    // H maps x to -sgn*||x|| e1, so R_kk = -sgn*||x|| and the sign fix multiplies by -sgn.
    v(0) += sgn * norm;
    double vn = v.norm();
    if (vn > 0.0) v /= vn;
    else v(0) = 1.0;
    signs(k) = -sgn;
    offset += static_cast<std::size_t>(len);
  }
  return OrthogonalMatrix::from_reflectors(n, std::move(refl), std::move(signs));
}

OrthogonalMatrix sample_haar_dense_qr(Eigen::Index n, Rng& rng) {
  require(n >= 1, ErrorKind::invalid_dimension, "sample_haar_dense_qr: n must be >= 1");
  Eigen::MatrixXd g(n, n);
  // Column-major fill, one column at a time.
  rng.fill_normal(g.data(), static_cast<std::size_t>(n * n));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return OrthogonalMatrix::from_dense(std::move(q));
}

Eigen::VectorXd sample_singular_values(const SingularValueLaw& law, Eigen::Index m, Rng& rng) {
  require(m >= 1, ErrorKind::invalid_dimension, "sample_singular_values: m must be >= 1");
  law.validate();
  Eigen::VectorXd s(m);
  switch (law.kind) {
    case SvLawKind::constant: s.setConstant(law.value); break;
    case SvLawKind::uniform:
      for (Eigen::Index i = 0; i < m; ++i) s(i) = rng.uniform(0.0, law.s_max);
      break;
    case SvLawKind::two_point:
      for (Eigen::Index i = 0; i < m; ++i) s(i) = rng.bernoulli(law.mass) ? law.value : 0.0;
      break;
    case SvLawKind::geometric:
      if (m == 1) {
        s(0) = law.s_max;
        break;
      }
      for (Eigen::Index i = 0; i < m; ++i)
        s(i) = law.s_max * std::pow(law.kappa, -static_cast<double>(i) / static_cast<double>(m - 1));
      s(m - 1) = law.s_max / law.kappa;
      break;
  }
  return s;
}

std::string_view to_string(MatrixMode mode) noexcept {
  return mode == MatrixMode::orthogonally_invariant ? "orthogonal" : "right";
}

MatrixMode matrix_mode_from_string(std::string_view name) {
  if (name == "orthogonal") return MatrixMode::orthogonally_invariant;
  if (name == "right") return MatrixMode::right_invariant_only;
  fail(ErrorKind::invalid_config, "unknown matrix mode '" + std::string(name) + "'", "model.matrix");
}

Eigen::VectorXd MatrixFactorization::s_padded() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(m) = s;
  return out;
}

MatrixFactorization make_factorization(OrthogonalMatrix u, Eigen::VectorXd s, OrthogonalMatrix v, double s_max) {
  require(u.size() == s.size() && v.size() >= u.size() && u.size() >= 1, ErrorKind::invalid_dimension,
          "factorization requires 1 <= m <= n and s of length m");
  require((s.array() >= 0.0).all() && (s.array() <= s_max).all(), ErrorKind::invalid_parameter,
          "singular values must lie in [0, s_max]");
  MatrixFactorization f;
  f.m = u.size();
  f.n = v.size();
  f.delta = static_cast<double>(f.m) / static_cast<double>(f.n);
  f.u = std::move(u);
  f.v = std::move(v);
  f.s = std::move(s);
  f.s_max = s_max;
  return f;
}

MatrixFactorization sample_rri_matrix(Eigen::Index m, Eigen::Index n, const SingularValueLaw& law, MatrixMode mode,
                                      Rng& rng) {
  require(m >= 1 && m <= n, ErrorKind::invalid_dimension, "sample_rri_matrix: need 1 <= m <= n");
  Rng rv = rng.child("v");
  Rng ru = rng.child("u");
  Rng rs = rng.child("s");
  OrthogonalMatrix v = sample_haar(n, rv);
  OrthogonalMatrix u = mode == MatrixMode::orthogonally_invariant ? sample_haar(m, ru) : OrthogonalMatrix::identity(m);
  Eigen::VectorXd s = sample_singular_values(law, m, rs);
  return make_factorization(std::move(u), std::move(s), std::move(v), law.support_max());
}

Eigen::VectorXd apply(const MatrixFactorization& fac, const Eigen::VectorXd& x) {
  require(x.size() == fac.n, ErrorKind::invalid_dimension, "apply: x must have length N");
  Eigen::VectorXd t = fac.v.apply_transpose(x);
  Eigen::VectorXd y = fac.s.cwiseProduct(t.head(fac.m));
  return fac.u.apply(y);
}

Eigen::VectorXd apply_transpose(const MatrixFactorization& fac, const Eigen::VectorXd& y) {
  require(y.size() == fac.m, ErrorKind::invalid_dimension, "apply_transpose: y must have length M");
  Eigen::VectorXd t = fac.u.apply_transpose(y);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(fac.n);
  x.head(fac.m) = fac.s.cwiseProduct(t);
  return fac.v.apply(x);
}

Eigen::MatrixXd materialize(const MatrixFactorization& fac) {
  Eigen::MatrixXd vt = fac.v.dense().transpose();
  Eigen::MatrixXd svt = fac.s.asDiagonal() * vt.topRows(fac.m);
  return fac.u.apply(svt);
}

double orthogonality_error(const OrthogonalMatrix& q) {
  Eigen::MatrixXd d = q.dense();
  Eigen::MatrixXd e = d.transpose() * d - Eigen::MatrixXd::Identity(q.size(), q.size());
  return e.cwiseAbs().maxCoeff();
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");

void write_u64(std::ofstream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::ifstream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_factorization(const MatrixFactorization& fac, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::io_error, "cannot open '" + path + "' for writing");
  os.write("MPF1", 4);
  write_u64(os, static_cast<std::uint64_t>(fac.m));
  write_u64(os, static_cast<std::uint64_t>(fac.n));
  os.write(reinterpret_cast<const char*>(fac.s.data()), static_cast<std::streamsize>(sizeof(double) * fac.m));
  Eigen::MatrixXd u = fac.u.dense();
  Eigen::MatrixXd v = fac.v.dense();
  os.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(sizeof(double) * u.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!os) fail(ErrorKind::io_error, "write failed for '" + path + "'");
}

MatrixFactorization read_factorization(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::io_error, "cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MPF1", 4) != 0) fail(ErrorKind::io_error, "bad magic in '" + path + "'");
  auto m = static_cast<Eigen::Index>(read_u64(is));
  auto n = static_cast<Eigen::Index>(read_u64(is));
  if (m < 1 || n < m) fail(ErrorKind::io_error, "bad dimensions in '" + path + "'");
  Eigen::VectorXd s(m);
  Eigen::MatrixXd u(m, m), v(n, n);
  is.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(sizeof(double) * m));
  is.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(sizeof(double) * u.size()));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!is) fail(ErrorKind::io_error, "truncated file '" + path + "'");
  double smax = s.size() ? s.maxCoeff() : 0.0;
  return make_factorization(OrthogonalMatrix::from_dense(std::move(u)), std::move(s),
                            OrthogonalMatrix::from_dense(std::move(v)), smax);
}

}  // namespace mpforge
