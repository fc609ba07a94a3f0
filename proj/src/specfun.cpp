#include "adlim/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

// Lanczos coefficients, g = 7, nine terms (about 15 significant digits).
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

// B_{2k} for k = 1..7.
constexpr std::array<double, 7> kBernoulli = {1.0 / 6.0,    -1.0 / 30.0,    1.0 / 42.0, -1.0 / 30.0,
                                              5.0 / 66.0,   -691.0 / 2730.0, 7.0 / 6.0};

bool near_nonpositive_integer(cplx s, double* which = nullptr) {
    double r = std::round(s.real());
    if (r > 0.0) return false;
    if (std::abs(s - cplx(r, 0.0)) < kPoleThreshold) {
        if (which) *which = r;
        return true;
    }
    return false;
}

// Gamma(z) for Re(z) >= 0.5.
cplx lanczos_gamma(cplx z) {
    z -= 1.0;
    cplx x = kLanczos[0];
    for (std::size_t i = 1; i < kLanczos.size(); ++i) x += kLanczos[i] / (z + static_cast<double>(i));
    cplx t = z + kLanczosG + 0.5;
    return std::sqrt(kTwoPi) * std::exp((z + 0.5) * std::log(t) - t) * x;
}

cplx lanczos_log_gamma(cplx z) {
    z -= 1.0;
    cplx x = kLanczos[0];
    for (std::size_t i = 1; i < kLanczos.size(); ++i) x += kLanczos[i] / (z + static_cast<double>(i));
    cplx t = z + kLanczosG + 0.5;
    return 0.5 * std::log(kTwoPi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace

cplx checked_scalar(cplx s, const char* where) {
    if (!is_finite(s)) throw DomainError(std::string(where) + ": non-finite argument");
    return s;
}

cplx LaurentExpansion::coeff(int k) const {
    auto it = coefficients.find(k);
    return it == coefficients.end() ? cplx(0.0) : it->second;
}

cplx gamma(cplx s) {
    checked_scalar(s, "gamma");
    double p;
    if (near_nonpositive_integer(s, &p)) throw PoleError("gamma: pole at non-positive integer", p, 1);
    if (s.real() < 0.5) return kPi / (std::sin(kPi * s) * lanczos_gamma(1.0 - s));
    return lanczos_gamma(s);
}

cplx rgamma(cplx s) {
    checked_scalar(s, "rgamma");
    if (s.imag() == 0.0 && s.real() <= 0.0 && s.real() == std::floor(s.real())) return 0.0;
    if (s.real() < 0.5) return std::sin(kPi * s) * lanczos_gamma(1.0 - s) / kPi;
    return 1.0 / lanczos_gamma(s);
}

cplx log_gamma(cplx s) {
    checked_scalar(s, "log_gamma");
    double p;
    if (near_nonpositive_integer(s, &p)) throw PoleError("log_gamma: pole", p, 1);
    if (s.real() < 0.5) return std::log(kPi) - std::log(std::sin(kPi * s)) - lanczos_log_gamma(1.0 - s);
    return lanczos_log_gamma(s);
}

cplx gamma_finite_part(int s0) {
    if (s0 > 0) throw DomainError("gamma_finite_part: argument must be a non-positive integer");
    int n = -s0;
    // Gamma(s) = (-1)^n / n! * [1/(s+n) + psi(n+1) + O(s+n)]
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    double sign = (n % 2 == 0) ? 1.0 : -1.0;
    return sign * digamma(cplx(n + 1.0, 0.0)) / fact;
}

cplx digamma(cplx s) {
    checked_scalar(s, "digamma");
    double p;
    if (near_nonpositive_integer(s, &p)) throw PoleError("digamma: pole", p, 1);
    if (s.real() < 0.5) return digamma(1.0 - s) - kPi / std::tan(kPi * s);
    cplx z = s;
    cplx shift = 0.0;
    while (std::abs(z) < 12.0 || z.real() < 6.0) {
        shift -= 1.0 / z;
        z += 1.0;
    }
    cplx z2 = 1.0 / (z * z);
    cplx zp = z2;
    cplx series = 0.0;
    for (std::size_t k = 0; k < kBernoulli.size(); ++k) {
        series += kBernoulli[k] / (2.0 * (k + 1)) * zp;
        zp *= z2;
    }
    return shift + std::log(z) - 0.5 / z - series;
}

namespace {

// Hermite's integral, for Re s < 0 where Euler-Maclaurin loses ~ x^{-Re s} to cancellation:
// zeta(s, b) = b^{-s}/2 + b^{1-s}/(s-1) + 2 int_0^inf sin(s atan(t/b)) (b^2+t^2)^{-s/2} / (e^{2 pi t} - 1) dt,
// evaluated at b = a + 1 for small a to keep the integrand smooth near t = 0.
cplx hurwitz_hermite(cplx s, double a) {
    const bool shift = a < 0.5;
    const double b = shift ? a + 1.0 : a;
    double T = 8.0;
    for (int it = 0; it < 3; ++it)
        T = (45.0 + 0.5 * kPi * std::abs(s.imag()) + 0.5 * std::abs(s.real()) * std::log(b * b + T * T)) / kTwoPi;
    QuadratureRule q = composite_gauss(0.0, T, 2 * static_cast<int>(std::ceil(T)), 24);
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        double t = q.nodes[i];
        cplx f = std::sin(s * std::atan(t / b)) * std::exp(-0.5 * s * std::log(b * b + t * t)) / std::expm1(kTwoPi * t);
        acc.add(q.weights[i] * f);
    }
    double lb = std::log(b);
    cplx bs = std::exp(-s * lb);
    cplx first = shift ? std::exp(-s * std::log(a)) : cplx(0.0);
    return first + 0.5 * bs + b * bs / (s - 1.0) + 2.0 * acc.value();
}

}  // namespace

cplx hurwitz_zeta_shifted(cplx s, double a) {
    checked_scalar(s, "hurwitz_zeta");
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("hurwitz_zeta: a must be positive");
    if (std::abs(s - 1.0) < kPoleThreshold) throw PoleError("hurwitz_zeta: pole at s = 1", 1.0, 1);
    constexpr int kTerms = 25;
    // pick the route with the smaller cancellation: (kTerms + a)^{-Re s} against e^{pi |Im s| / 2}
    if (s.real() < -0.5 && a <= 1.0 && -s.real() * std::log(kTerms + a) > 0.5 * kPi * std::abs(s.imag()))
        return hurwitz_hermite(s, a);
    CompensatedSum<double> re, im;
    for (int n = 0; n < kTerms; ++n) {
        cplx term = std::exp(-s * std::log(n + a));
        re.add(term.real());
        im.add(term.imag());
    }
    double x = kTerms + a;
    double lx = std::log(x);
    cplx xs = std::exp(-s * lx);  // x^{-s}
    cplx tail = x * xs / (s - 1.0) + 0.5 * xs;
    // Euler-Maclaurin corrections through B_14.
    cplx poch = s;             // (s)_{2k-1}
    cplx xpow = xs / x;        // x^{-s-2k+1}
    double fact = 2.0;         // (2k)!
    for (std::size_t k = 0; k < kBernoulli.size(); ++k) {
        tail += kBernoulli[k] / fact * poch * xpow;
        double m = 2.0 * k + 1.0;
        poch *= (s + m) * (s + m + 1.0);
        xpow /= x * x;
        fact *= (m + 2.0) * (m + 3.0);
    }
    re.add(tail.real());
    im.add(tail.imag());
    return {re.value(), im.value()};
}

cplx hurwitz_zeta(cplx s, double a) {
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("hurwitz_zeta: a must lie in (0, 1]");
    return hurwitz_zeta_shifted(s, a);
}

cplx riemann_zeta(cplx s) { return hurwitz_zeta(s, 1.0); }

cplx f_weight(cplx s) {
    checked_scalar(s, "f_weight");
    double p;
    if (near_nonpositive_integer(s - 0.5, &p))
        throw PoleError("f_weight: pole of Gamma(s - 1/2)", p + 0.5, 1);
    return kSqrtPi * gamma(s - 0.5) * rgamma(s);
}

namespace {
// The continued fraction keeps relative accuracy in the tail, where 1 - P cancels.
bool use_continued_fraction(cplx a, double x) { return x > std::max(2.0, std::abs(a) + 1.0); }

cplx gamma_q_at_zero(cplx a, const char* who) {
    if (a.real() > 0.0) return 1.0;
    throw DomainError(std::string(who) + ": Q(a, 0) diverges for Re a <= 0");
}
}  // namespace

cplx gamma_q(cplx a, double x) {
    checked_scalar(a, "gamma_q");
    if (x == 0.0) return gamma_q_at_zero(a, "gamma_q");
    if (!(x > 0.0)) throw DomainError("gamma_q: x must be non-negative");
    cplx xa = std::exp(a * std::log(x));
    if (!use_continued_fraction(a, x)) {
        // Q = 1 - x^a e^{-x} sum_n x^n / Gamma(a + n + 1)
        int direct = 3 + static_cast<int>(std::max(0.0, -a.real()));
        CompensatedSum<double> re, im;
        cplx r = 0.0;
        double xn = 1.0;
        for (int n = 0; n < 400; ++n) {
            if (n <= direct)
                r = rgamma(a + static_cast<double>(n + 1));
            else
                r /= (a + static_cast<double>(n));
            cplx term = xn * r;
            re.add(term.real());
            im.add(term.imag());
            double mag = std::abs(cplx(re.value(), im.value()));
            if (n > x && std::abs(term) <= 1e-17 * mag) break;
            xn *= x;
        }
        return 1.0 - xa * std::exp(-x) * cplx(re.value(), im.value());
    }
    // Continued fraction for Gamma(a, x), modified Lentz.
    const double tiny = 1e-300;
    cplx b = x + 1.0 - a;
    cplx c = 1.0 / tiny;
    cplx d = 1.0 / b;
    cplx h = d;
    for (int i = 1; i < 5000; ++i) {
        cplx an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        cplx del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 4e-16) break;
    }
    return std::exp(-x) * xa * h * rgamma(a);
}

std::vector<cplx> gamma_q_many(cplx a, const std::vector<double>& x) {
    checked_scalar(a, "gamma_q_many");
    double xmax = 0.0;
    for (double xi : x) {
        if (!(xi >= 0.0)) throw DomainError("gamma_q_many: x must be non-negative");
        if (xi > 0.0 && !use_continued_fraction(a, xi)) xmax = std::max(xmax, xi);
    }
    // Table length covers the slowest converging series.
    int nmax = 30 + static_cast<int>(3.0 * xmax);
    std::vector<cplx> r(nmax);
    int direct = 3 + static_cast<int>(std::max(0.0, -a.real()));
    for (int n = 0; n < nmax; ++n)
        r[n] = n <= direct ? rgamma(a + static_cast<double>(n + 1)) : r[n - 1] / (a + static_cast<double>(n));
    std::vector<cplx> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i];
        if (xi == 0.0 || use_continued_fraction(a, xi)) {
            out[i] = gamma_q(a, xi);
            continue;
        }
        cplx sum = 0.0;
        double xn = 1.0;
        for (int n = 0; n < nmax; ++n) {
            cplx term = xn * r[n];
            sum += term;
            if (n > xi && std::abs(term) <= 1e-17 * std::abs(sum)) break;
            xn *= xi;
        }
        out[i] = 1.0 - std::exp(a * std::log(xi) - xi) * sum;
    }
    return out;
}

LaurentExpansion laurent_coefficients(const ScalarFn& fn, cplx z, int k_min, int k_max, double radius,
                                      int samples) {
    checked_scalar(z, "laurent_coefficients");
    if (samples < 64) throw DomainError("laurent_coefficients: at least 64 samples required");
    if (k_min < -2 || k_max < k_min) throw DomainError("laurent_coefficients: bad order range");
    if (!(radius > 0.0)) throw DomainError("laurent_coefficients: radius must be positive");

    auto extract = [&](double r, double* fmax) {
        std::vector<cplx> values(samples);
        *fmax = 0.0;
        for (int j = 0; j < samples; ++j) {
            double phi = kTwoPi * j / samples;
            values[j] = fn(z + r * std::polar(1.0, phi));
            if (!is_finite(values[j])) throw NonConvergence("laurent_coefficients: non-finite sample");
            *fmax = std::max(*fmax, std::abs(values[j]));
        }
        std::map<int, cplx> out;
        for (int k = k_min; k <= k_max; ++k) {
            CompensatedSum<double> re, im;
            for (int j = 0; j < samples; ++j) {
                cplx w = values[j] * std::polar(1.0, -kTwoPi * static_cast<double>(k) * j / samples);
                re.add(w.real());
                im.add(w.imag());
            }
            out[k] = cplx(re.value(), im.value()) * std::pow(r, -k) / static_cast<double>(samples);
        }
        return out;
    };

    double fmax_full = 0.0, fmax_half = 0.0;
    auto full = extract(radius, &fmax_full);
    auto half = extract(0.5 * radius, &fmax_half);

    LaurentExpansion out;
    out.center = z;
    out.radius_used = radius;
    out.coefficients = full;
    for (int k = k_min; k <= k_max; ++k) {
        double delta = std::abs(full[k] - half[k]);
        double scale = std::max({std::abs(full[k]), std::abs(half[k]),
                                 1e-4 * fmax_half * std::pow(0.5 * radius, -k)});
        out.tolerance = std::max(out.tolerance, delta);
        // Absolute floor for functions that vanish up to rounding.
        if (delta > 1e-6 * scale + 1e-13 * std::pow(0.5 * radius, -k))
            throw NonConvergence("laurent_coefficients: order " + std::to_string(k) +
                                 " unstable under radius halving");
    }
    return out;
}

}  // namespace adlim
