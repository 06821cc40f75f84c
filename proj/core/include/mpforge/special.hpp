#pragma once

namespace mpforge {

/// Scaled complementary error function exp(x^2) erfc(x), accurate in the far tail.
double erfcx(double x);

double normal_pdf(double x);
double normal_cdf(double x);

/// Inverse Mills ratio phi(c)/Phi(c), stable for large negative c.
double inv_mills(double c);

}  // namespace mpforge
