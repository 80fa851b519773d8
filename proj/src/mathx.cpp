#include "qgm/mathx.hpp"

#include <cmath>
#include <limits>

namespace qgm {

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

namespace {

// Acklam's rational approximation, |relative error| < 1.15e-9 before polish.
double acklam(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    double x = acklam(p);
    // One Newton step; use the complementary form on whichever side is small
    // so the correction keeps full relative accuracy in the tails.
    if (p < 0.5) {
        double e = normal_cdf(x) - p;
        x -= e / normal_pdf(x);
    } else {
        double q = 1.0 - p;
        double e = normal_cdf(-x) - q;
        x += e / normal_pdf(x);
    }
    return x;
}

double normal_quantile_upper_log(double log_q) {
    if (log_q >= 0.0) return -std::numeric_limits<double>::infinity();
    // Phi^{-1}(1-q) = -Phi^{-1}(q); the lower-tail evaluation stays accurate
    // for q all the way down to the smallest normal double.
    if (log_q > std::log(1e-290)) {
        return -normal_quantile(std::exp(log_q));
    }
    // Asymptotic inversion of q = Phi(-x) ~ phi(x)/x for x -> inf:
    //   x^2/2 + log x + log sqrt(2*pi) = -log q
    // solved by a few fixed-point sweeps; accurate to ~1e-12 relative here.
    const double L = -log_q;
    double x = std::sqrt(2.0 * L);
    for (int it = 0; it < 8; ++it) {
        x = std::sqrt(2.0 * (L - std::log(x) - 0.9189385332046727));
    }
    return x;
}

}  // namespace qgm
