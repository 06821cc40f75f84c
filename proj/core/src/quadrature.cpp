#include "mpforge/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mpforge/error.hpp"

namespace mpforge {
namespace {

GaussHermite build_gauss_hermite(int n) {
  // Jacobi matrix of the monic probabilists' Hermite recurrence He_{k+1} = x He_k - k He_{k-1}.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    j(k, k - 1) = std::sqrt(static_cast<double>(k));
    j(k - 1, k) = j(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  GaussHermite rule;
  rule.x.resize(n);
  rule.w.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    rule.x[i] = es.eigenvalues()(i);
    rule.w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    total += rule.w[i];
  }
  for (double& wi : rule.w) wi /= total;
  // Symmetrize to remove eigen-solver round-off.
  for (int i = 0; i < n / 2; ++i) {
    double xs = 0.5 * (rule.x[n - 1 - i] - rule.x[i]);
    double ws = 0.5 * (rule.w[n - 1 - i] + rule.w[i]);
    rule.x[i] = -xs;
    rule.x[n - 1 - i] = xs;
    rule.w[i] = ws;
    rule.w[n - 1 - i] = ws;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussHermite& gauss_hermite(int n) {
  require(n >= 1 && n <= 512, ErrorKind::invalid_parameter, "gauss_hermite: node count out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussHermite>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<GaussHermite>(build_gauss_hermite(n))).first;
  return *it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, rel_tol);
}

}  // namespace mpforge
