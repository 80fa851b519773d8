#pragma once

namespace qgm {

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal CDF (via erfc, accurate in both tails).
double normal_cdf(double x);

/// Inverse standard normal CDF, |error| <= 1e-12 on (0,1).
/// Rational approximation (Acklam) polished by one Newton step on the CDF.
double normal_quantile(double p);

/// Phi^{-1}(1 - q) for an upper-tail mass given as log(q). Handles tail
/// masses far below the smallest positive double.
double normal_quantile_upper_log(double log_q);

}  // namespace qgm
