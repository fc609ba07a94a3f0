#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "adlim/errors.hpp"
#include "adlim/specfun.hpp"

using namespace adlim;
namespace bm = boost::math;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 40-digit reference values (mpmath), {Re s, Im s, a, Re zeta, Im zeta}.
struct HurwitzRow {
    double sr, si, a, zr, zi;
};
const HurwitzRow kHurwitzTable[] = {
    {-20, 0, 1, 0.0, 0.0},
    {-20, 0, 0.3, 80.090973876253593, 0.0},
    {-13.5, 0, 0.05, -0.1098477465880546, 0.0},
    {-7, 0, 1, 0.0041666666666666667, 0.0},
    {-5, 2, 0.7, 0.015859294978941602, -0.026797835669814783},
    {-3, 0, 0.01, 0.0083088308333333333, 0.0},
    {-2.5, 1.5, 0.5, -0.036954334981970659, -0.0077233353986927002},
    {-1, 0, 0.3, 0.021666666666666664, 0.0},
    {-1, 0.1, 0.3, 0.020812728257449506, 0.0095560051780250776},
    {-0.5, 8, 0.9, 0.62521922018727019, 1.479321009896367},
    {0, 0, 0.25, 0.25, 0.0},
    {0, 15, 0.4, 1.9289575610782629, 1.8656659275719247},
    {0.5, 0, 0.001, 30.161116407905769, 0.0},
    {0.5, 14.1, 1, 0.0046984001834891872, -0.027058282374251048},
    {1.5, -3, 0.6, -0.045984615599164214, -1.7895183772984529},
    {2, 0, 0.3, 12.245364546107731, 0.0},
    {3, 0, 0.5, 8.41439832211716, 0.0},
    {4, 10, 0.2, -579.03326707393181, -236.04846518156506},
    {7.5, 0, 0.05, 5724334023.097872, 0.0},
    {12, -5, 0.8, 6.3952005204551236, -13.070745703270685},
    {19.9, 0, 1, 1.0000010224439826, 0.0},
    {-12, 8, 0.35, 490.07002081315587, -172.87227196545839},
    {-15, -6, 0.9, 194.24573272968239, -862.40501940281366},
    {2, 19, 0.15, -4.5373816382802926, -44.906996496329619},
};
// Negative Re s with large Im s: both evaluation routes lose digits to cancellation.
const HurwitzRow kHurwitzHard[] = {
    {-5, 14, 0.5, 8.2955889224804865, 94.66811897329798},
    {-3, 12, 0.2, -4.2378340158189179, -9.6386492593357361},
};


// -B_{n+1}(a)/(n+1) for n = 0, 1, 2
double hurwitz_negative(int n, double a) {
    switch (n) {
        case 0: return 0.5 - a;
        case 1: return -(a * a - a + 1.0 / 6.0) / 2.0;
        default: return -(a * a * a - 1.5 * a * a + 0.5 * a) / 3.0;
    }
}

}  // namespace

TEST_CASE("gamma matches Boost on the real line") {
    for (double x : {0.1, 0.5, 1.0, 2.5, 7.25, 20.0, 120.5, -0.5, -2.7})
        CHECK(rel(adlim::gamma(x), bm::tgamma(x)) < 1e-13);
    for (double x : {0.3, 1.0, 4.5, 33.0, -1.5}) CHECK(rel(adlim::digamma(x), bm::digamma(x)) < 1e-13);
}

TEST_CASE("gamma recurrence and reflection in the complex plane") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> re(-6.0, 12.0), im(-15.0, 15.0);
    for (int i = 0; i < 200; ++i) {
        cplx s(re(rng), im(rng));
        if (std::abs(s.imag()) < 0.1) continue;
        CHECK(rel(adlim::gamma(s + 1.0), s * adlim::gamma(s)) < 1e-12);
        CHECK(rel(adlim::gamma(s) * adlim::gamma(1.0 - s), kPi / std::sin(kPi * s)) < 1e-11);
        CHECK(std::abs(rgamma(s) * adlim::gamma(s) - 1.0) < 1e-12);
        CHECK(rel(std::exp(log_gamma(s)), adlim::gamma(s)) < 1e-11);
    }
}

TEST_CASE("rgamma vanishes at the poles and gamma rejects them") {
    for (int n = 0; n < 6; ++n) CHECK(rgamma(cplx(-n)) == cplx(0.0));
    CHECK_THROWS_AS(adlim::gamma(cplx(-3.0)), PoleError);
    CHECK_THROWS_AS(adlim::gamma(cplx(std::nan(""))), DomainError);
    // constant term of Gamma at 0 is -Euler gamma
    CHECK(std::abs(gamma_finite_part(0) + 0.57721566490153286) < 1e-12);
    CHECK(std::abs(gamma_finite_part(-1) - (0.57721566490153286 - 1.0)) < 1e-12);
}

TEST_CASE("Hurwitz zeta against a high-precision table") {
    for (const HurwitzRow& r : kHurwitzTable) {
        cplx ref(r.zr, r.zi);
        CAPTURE(r.sr);
        CAPTURE(r.si);
        CAPTURE(r.a);
        CHECK(std::abs(hurwitz_zeta(cplx(r.sr, r.si), r.a) - ref) <= 1e-11 * std::max(1.0, std::abs(ref)));
    }
    for (const HurwitzRow& r : kHurwitzHard) {
        cplx ref(r.zr, r.zi);
        CHECK(std::abs(hurwitz_zeta(cplx(r.sr, r.si), r.a) - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("Riemann zeta matches Boost") {
    for (double s : {-7.0, -2.5, -1.0, 0.0, 0.5, 1.5, 2.0, 3.7, 10.0})
        CHECK(std::abs(riemann_zeta(s) - bm::zeta(s)) < 1e-12 * std::max(1.0, std::abs(bm::zeta(s))));
    CHECK(std::abs(riemann_zeta(0.0) + 0.5) < 1e-14);
    CHECK_THROWS_AS(riemann_zeta(1.0), PoleError);
}

TEST_CASE("Hurwitz zeta: Bernoulli values, multiplication formulas, direct sums") {
    for (double a : {0.1, 0.25, 0.5, 0.9, 1.0})
        for (int n = 0; n <= 2; ++n)
            CHECK(std::abs(hurwitz_zeta(cplx(-n), a) - hurwitz_negative(n, a)) < 1e-12);
    CHECK(std::abs(hurwitz_zeta(-1.0, 0.25).real() - 0.0104166666666667) < 1e-9);
    for (double s : {-2.5, 0.5, 2.0, 3.3}) {
        double z = bm::zeta(s);
        CHECK(std::abs(hurwitz_zeta(s, 0.5) - (std::pow(2.0, s) - 1.0) * z) < 1e-11 * std::max(1.0, std::abs(z)));
        CHECK(std::abs(hurwitz_zeta(s, 0.25) + hurwitz_zeta(s, 0.75) - (std::pow(4.0, s) - std::pow(2.0, s)) * z) <
              1e-10 * std::max(1.0, std::abs(z)));
    }
    // direct sum plus an integral tail, s = 6 at a complex point
    cplx s(6.0, 2.0);
    double a = 0.3;
    cplx acc = 0.0;
    const int N = 2000;
    for (int k = 0; k < N; ++k) acc += std::exp(-s * std::log(k + a));
    double x = N + a;
    acc += std::exp((1.0 - s) * std::log(x)) / (s - 1.0) + 0.5 * std::exp(-s * std::log(x));
    CHECK(rel(hurwitz_zeta(s, a), acc) < 1e-12);
    cplx shifted = 0.0;
    for (int k = 3; k < N; ++k) shifted += std::exp(-s * std::log(k + a));
    shifted += std::exp((1.0 - s) * std::log(x)) / (s - 1.0) + 0.5 * std::exp(-s * std::log(x));
    CHECK(rel(hurwitz_zeta_shifted(s, a + 3.0), shifted) < 1e-12);
}

TEST_CASE("f_weight is the integral of (1 + tau^2)^-s") {
    bm::quadrature::tanh_sinh<double> q;
    for (double s : {0.75, 1.0, 2.0, 3.5, 9.0}) {
        double I = q.integrate([&](double t) { return std::pow(1.0 + t * t, -s); },
                               -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
        CHECK(rel(f_weight(s), I) < 1e-10);
    }
    cplx s(2.0, 1.0);
    double re = q.integrate([&](double t) { return std::exp(-s * std::log1p(t * t)).real(); },
                            -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    double im = q.integrate([&](double t) { return std::exp(-s * std::log1p(t * t)).imag(); },
                            -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    CHECK(rel(f_weight(s), cplx(re, im)) < 1e-10);
}

TEST_CASE("incomplete gamma matches Boost") {
    for (double a : {0.5, 1.0, 2.5, 7.0})
        for (double x : {0.0, 0.01, 0.7, 3.0, 15.0, 60.0}) {
            double ref = bm::gamma_q(a, x);
            CHECK(std::abs(gamma_q(a, x).real() - ref) < 1e-12 * std::max(ref, 1e-200) + 1e-300);
        }
    // the batched form is the same function
    std::vector<double> xs{0.2, 1.0, 5.0, 39.0, 45.0};
    cplx a(-0.5, 0.3);
    std::vector<cplx> many = gamma_q_many(a, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(rel(many[i], gamma_q(a, xs[i])) < 1e-11);
    // Q(a, 0) = 1 only while the integral converges
    CHECK(gamma_q(cplx(0.5), 0.0) == 1.0);
    CHECK_THROWS_AS(gamma_q(a, 0.0), DomainError);
}

TEST_CASE("Laurent extraction recovers the expansion of Gamma at 0") {
    LaurentExpansion l = laurent_coefficients([](cplx s) { return adlim::gamma(s); }, 0.0, -1, 2);
    const double eg = 0.57721566490153286;
    CHECK(std::abs(l.coeff(-1) - 1.0) < 1e-12);
    CHECK(std::abs(l.coeff(0) + eg) < 1e-11);
    CHECK(std::abs(l.coeff(1) - 0.5 * (eg * eg + kPi * kPi / 6.0)) < 1e-10);
}
