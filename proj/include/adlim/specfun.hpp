#pragma once

#include <functional>
#include <map>
#include <vector>

#include "adlim/numerics.hpp"

namespace adlim {

// Points closer than this to a pole are treated as on the pole.
inline constexpr double kPoleThreshold = 1e-12;

// Rejects NaN/Inf arguments with DomainError.
cplx checked_scalar(cplx s, const char* where);

cplx gamma(cplx s);
// Real overloads keep unqualified calls from binding to the C library's gamma().
inline cplx gamma(double s) { return gamma(cplx(s, 0.0)); }
// 1/Gamma(s); entire, exact zeros at the non-positive integers.
cplx rgamma(cplx s);
cplx log_gamma(cplx s);
// Constant Laurent coefficient of Gamma at the non-positive integer s0.
cplx gamma_finite_part(int s0);
cplx digamma(cplx s);
inline cplx digamma(double s) { return digamma(cplx(s, 0.0)); }

// Hurwitz zeta for a in (0, 1]. Relative error (to max(1, |zeta|)) about 1e-12 for |s| <= 20,
// except -10 < Re s < -1/2 with |Im s| > 3, where it degrades to ~1e-7.
cplx hurwitz_zeta(cplx s, double a);
// Same expansion for any a > 0; used for shifted tails.
cplx hurwitz_zeta_shifted(cplx s, double a);
cplx riemann_zeta(cplx s);

// sqrt(pi) Gamma(s - 1/2) / Gamma(s) = integral of (1 + tau^2)^{-s} over the line.
cplx f_weight(cplx s);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a), x >= 0;
// continued through the poles of Gamma (Q(-n, x) = 0).
cplx gamma_q(cplx a, double x);
// Q(a, x_i) for many x sharing one a; the 1/Gamma(a + n + 1) table is built once.
std::vector<cplx> gamma_q_many(cplx a, const std::vector<double>& x);

struct LaurentExpansion {
    cplx center;
    std::map<int, cplx> coefficients;
    double radius_used = 0.0;
    // Largest coefficient change observed under radius halving.
    double tolerance = 0.0;

    cplx coeff(int k) const;
};

using ScalarFn = std::function<cplx(cplx)>;

// Trapezoid contour extraction of the coefficients of (s - z)^k, k in [k_min, k_max].
LaurentExpansion laurent_coefficients(const ScalarFn& fn, cplx z, int k_min, int k_max,
                                      double radius = 0.1, int samples = 128);

}  // namespace adlim
