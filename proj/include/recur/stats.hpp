#pragma once

namespace recur {

double normal_cdf(double x);

// Inverse standard normal CDF; rational start plus Halley refinement, |error| < 1e-12.
double normal_quantile(double p);

// Upper tail of the chi-square distribution with one degree of freedom.
double chisq1_upper(double x);

}  // namespace recur
