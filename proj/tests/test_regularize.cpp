#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/zeta.hpp>

#include "adlim/errors.hpp"
#include "adlim/lab.hpp"
#include "adlim/regularize.hpp"

using namespace adlim;

namespace {

// sum over m in Z of (m^2 + b^2)^-2
double lattice_inverse_square(double b) {
    double x = kPi * b;
    double coth = 1.0 / std::tanh(x);
    double csch = 1.0 / std::sinh(x);
    return kPi / (2.0 * b * b * b) * coth + kPi * kPi / (2.0 * b * b) * csch * csch;
}

}  // namespace

TEST_CASE("smooth cutoff") {
    SmoothCutoff c = SmoothCutoff::for_window(8.0);
    CHECK(c.chi(c.lo()) == 1.0);
    CHECK(c.chi(c.hi()) < 1e-16);
    CHECK(std::abs(c.chi(c.x_mid) - 0.5) < 1e-15);
    CHECK(c.hi() < 1.05 * 8.0);  // inside the truncation margin
    for (double x = 0.0; x < 8.0; x += 0.25) CHECK(c.chi(x) >= c.chi(x + 0.25));
}

TEST_CASE("finite spectra: zeta(0) counts, det is the product") {
    NoTail none;
    SpectralInput two = make_input(std::vector<double>{2.0}, none);
    CHECK(std::abs(continue_to_zero(two, none, SpectralFunction::Zeta).regularized - 1.0) < 1e-10);
    CHECK(std::abs(det_zeta(two, none).value - 2.0) < 1e-9);
    SpectralInput three = make_input(std::vector<double>{-3.0, 0.5, 2.0}, none);
    CHECK(std::abs(det_zeta(three, none).value - 3.0) < 1e-9);
    CHECK(std::abs(continue_to_zero(three, none, SpectralFunction::Eta).regularized - 1.0) < 1e-9);
}

TEST_CASE("integer spectrum with kernel") {
    ArithmeticTail z(1.0, 0.0, 40);
    SpectralInput in = make_input(z.window_values(), z, 1.0);
    CHECK(in.kernel_dim == 1);
    CHECK(std::abs(continue_to_zero(in, z, SpectralFunction::Zeta).regularized) < 1e-8);
    CHECK(std::abs(continue_to_zero(in, z, SpectralFunction::Eta).regularized - 1.0) < 1e-8);
}

TEST_CASE("half-integer spectrum: det = 2") {
    ArithmeticTail h(1.0, 0.5, 40);
    SpectralInput in = make_input(h.window_values(), h, 1.0);
    CHECK(std::abs(det_zeta(in, h).value - 2.0) < 1e-7);
}

TEST_CASE("eta of t(k + alpha) on both continuation routes") {
    for (double t : {1.0, 0.3, 0.05}) {
        ArithmeticTail a(t, 0.3, static_cast<int>(std::ceil(8.0 / t)));
        SpectralInput in = make_input(a.window_values(), a, t);
        double heat = continue_to_zero(in, a, SpectralFunction::Eta).regularized;
        double closed = continue_closed_form(in, a, SpectralFunction::Eta, 0.0).regularized;
        CHECK(std::abs(heat - 0.4) < 1e-8);
        CHECK(std::abs(closed - 0.4) < 1e-11);
    }
}

TEST_CASE("zeta(-1) of |k + 0.3| on both routes") {
    ArithmeticTail a(1.0, 0.3, 12);
    SpectralInput in = make_input(a.window_values(), a, 1.0);
    double expect = -(0.3 * 0.3 - 0.3 + 1.0 / 6.0);  // twice -B_2(0.3)/2
    // the zeta route is the plain sum |lambda|^-s, no Gamma factor
    CHECK(std::abs(continue_closed_form(in, a, SpectralFunction::Zeta, -1.0).regularized - expect) < 1e-12);
    CHECK(std::abs(continue_to(in, a, SpectralFunction::Zeta, -1.0).regularized - expect) < 1e-6);
}

TEST_CASE("constant flux at s = 4 against the lattice closed form") {
    Family f = FluxFamily::from_half({{0, 0.5}});
    const double t = 0.2;
    auto d = delta_sample(f, t);
    Regularized z = zeta_bar_direct(d->input, *d->tail, 4.0, &d->alt_input, d->alt_tail.get());
    // Gamma(2) * 2 sum_k sum_m (t^2 m^2 + c_k^2)^-2, c_k = |k + 1/2|
    double acc = 0.0;
    const int N = 200000;
    for (int k = N - 1; k >= 0; --k) {
        double c = k + 0.5;
        acc += 2.0 * lattice_inverse_square(c / t) / std::pow(t, 4);
    }
    acc += kPi / (2.0 * t * N * double(N));  // k >= N, leading order in t/c
    double ref = 2.0 * acc;
    CHECK(std::abs(z.value.real() - ref) / ref < 1e-8);
    CHECK(z.error < 1e-6 * ref);
}

TEST_CASE("heat-trace continuation agrees with the direct sum in the convergent region") {
    Family f = FluxFamily::from_half({{0, 0.5}, {1, cplx(0.0, -0.1)}});
    auto d = delta_sample(f, 0.2);
    cplx direct = zeta_bar_direct(d->input, *d->tail, 4.0).value;
    cplx heat = continue_to(d->input, *d->tail, SpectralFunction::Zeta, 4.0).laurent.coeff(0);
    CHECK(std::abs(heat - direct) < 1e-6 * std::abs(direct));
    CHECK_THROWS_AS(zeta_bar_direct(d->input, *d->tail, 2.0), RegionError);
}

TEST_CASE("taylor_in_t recovers polynomials and log terms") {
    std::vector<double> t{0.2, 0.15, 0.1, 0.07, 0.05, 0.03, 0.02};
    std::vector<double> v, w;
    for (double x : t) {
        v.push_back(1.5 - 0.25 * x + 3.0 * x * x);
        w.push_back(2.0 - 0.4 * std::log(x) + 0.1 * x);
    }
    TaylorFit p = taylor_in_t(t, v, 2, false);
    CHECK(std::abs(p.coefficients[0] - 1.5) < 1e-11);
    CHECK(std::abs(p.coefficients[1] + 0.25) < 1e-9);
    TaylorFit l = taylor_in_t(t, w, 1, true);
    CHECK(std::abs(l.log_coefficient + 0.4) < 1e-9);
    CHECK(std::abs(l.coefficients[0] - 2.0) < 1e-9);
    CHECK_THROWS_AS(taylor_in_t({0.1, 0.2, 0.3}, {1.0, 1.0, 1.0}, 1, false), DomainError);
}

TEST_CASE("adaptive fit picks the lowest consistent order") {
    std::vector<LimitSample> s;
    for (double t : {0.2, 0.15, 0.1, 0.07, 0.05, 0.03}) s.push_back({t, 2.0 + t * t, 1e-10});
    AdaptiveFit a = adaptive_taylor(s, false, 1);
    CHECK(a.order == 2);
    CHECK(std::abs(a.fit.coefficients[0] - 2.0) < 1e-9);
}
