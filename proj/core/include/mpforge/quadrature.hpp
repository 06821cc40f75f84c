#pragma once

#include <functional>
#include <vector>

namespace mpforge {

/// Nodes and weights for E[f(Z)], Z ~ N(0,1): sum_i w_i f(x_i). Weights sum to 1.
struct GaussHermite {
  std::vector<double> x;
  std::vector<double> w;
};

/// Probabilists' Gauss-Hermite rule with n nodes (Golub-Welsch). Cached, thread-safe.
const GaussHermite& gauss_hermite(int n);

/// Adaptive Gauss-Kronrod integral of f over [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-13);

}  // namespace mpforge
