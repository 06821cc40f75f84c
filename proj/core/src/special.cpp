#include "mpforge/special.hpp"

#include <cmath>
#include <numbers>

namespace mpforge {
namespace {

// Continued fraction for x >= 6, evaluated bottom-up with a fixed depth.
double erfcx_tail(double x) {
  double f = x;
  for (int k = 60; k >= 1; --k) f = x + (0.5 * k) / f;
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

}  // namespace

double erfcx(double x) {
  if (x >= 6.0) return erfcx_tail(x);
  if (x >= 0.0) return std::exp(x * x) * std::erfc(x);
  // Reflection: erfc(-x) = 2 - erfc(x).
  return 2.0 * std::exp(x * x) - erfcx(-x);
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inv_mills(double c) {
  return std::sqrt(2.0 / std::numbers::pi) / erfcx(-c / std::numbers::sqrt2);
}

}  // namespace mpforge
