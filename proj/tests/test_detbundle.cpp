#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "adlim/detbundle.hpp"
#include "adlim/errors.hpp"

using namespace adlim;

namespace {

// Gamma(1 + s/2) a' sum_k sign(k + a) |k + a|^{-s-1}, direct
double flux_form_direct(double a, double ap, double s) {
    double acc = 0.0;
    for (int k = 200000; k >= -200000; --k) {
        double l = k + a;
        acc += (l > 0 ? 1.0 : -1.0) * std::pow(std::abs(l), -s - 1.0);
    }
    return boost::math::tgamma(1.0 + 0.5 * s) * ap * acc;
}

MatrixLoop scalar_loop(cplx c0, cplx c1) {
    MatrixLoop m;
    CMatrix a(1, 1), b(1, 1);
    a(0, 0) = c0;
    b(0, 0) = c1;
    m.fourier[0] = a;
    m.fourier[1] = b;
    return m;
}

}  // namespace

TEST_CASE("flux Bismut-Freed form against a direct sum") {
    FluxFamily f = FluxFamily::from_half({{0, 0.3}, {1, cplx(0.05, -0.1)}});
    for (double th : {0.4, 2.0}) {
        double direct = flux_form_direct(f.a(th) - std::floor(f.a(th)), f.a_prime(th), 3.0);
        CHECK(std::abs(bf_value(Family(f), th, 3.0).real() - direct) < 1e-9 * std::max(1.0, std::abs(direct)));
    }
    // at s = 0: a' pi cot(pi frac)
    double th = 1.1;
    double fr = f.a(th) - std::floor(f.a(th));
    CHECK(std::abs(bf_value_at_zero(Family(f), th).real() - f.a_prime(th) * kPi / std::tan(kPi * fr)) < 1e-10);
}

TEST_CASE("scalar loop: the connection is the logarithmic derivative") {
    // D = 2 + 0.5 e^{i theta}: A(0) = D'/D, holonomy exp(-oint D'/D) = 1 for winding 0
    Family f = scalar_loop(2.0, 0.5);
    for (double th : {0.0, 1.3, 4.0}) {
        cplx d = 2.0 + 0.5 * std::exp(cplx(0.0, th));
        cplx dp = cplx(0.0, 0.5) * std::exp(cplx(0.0, th));
        CHECK(std::abs(bf_value_at_zero(f, th) - dp / d) < 1e-12);
    }
    CHECK(std::abs(holonomy(f, 512) - 1.0) < 1e-12);
}

TEST_CASE("invertible flux loops have trivial holonomy") {
    for (auto half : {std::map<int, cplx>{{0, 0.5}, {1, cplx(0.0, -0.1)}}, std::map<int, cplx>{{0, 0.3}, {1, 0.05}}}) {
        Family f = FluxFamily::from_half(half);
        CHECK(std::abs(holonomy(f, 1024) - 1.0) < 1e-8);
    }
}

TEST_CASE("holonomy is grid independent for a stabilized family") {
    Family crossing = FluxFamily::from_half({{1, cplx(0.0, -0.3)}});
    CHECK_THROWS_AS(holonomy(crossing, 256), NotInvertible);
    StabilizedFamily sf = stabilize(crossing);
    CHECK(std::abs(holonomy(sf, 2048) - holonomy(sf, 4096)) < 1e-10);
    StabilizeOptions o;
    o.choice = StabilizeOptions::LevelChoice::LongestArc;
    CHECK(std::abs(holonomy(stabilize(crossing, o), 2048) - holonomy(sf, 2048)) < 1e-6);
}

TEST_CASE("low-mode window: trace and closed form agree") {
    StabilizedFamily sf = stabilize(Family(FluxFamily::from_half({{1, cplx(0.0, -0.3)}})));
    for (double th : {0.3, 2.0, 5.0})
        CHECK(std::abs(bf_window_direct(sf, th, 2.0) - bf_window_closed(sf, th, 2.0)) < 1e-10);
}

TEST_CASE("spectral flow counts the winding and matches the residue index") {
    for (int c : {-1, 1, 2, 0}) {
        FluxFamily f = FluxFamily::from_half({{0, 0.1}}, c);
        SpectralFlowRecord r = spectral_flow(f, 1024);
        CHECK(r.total == c);
        CHECK(std::abs(index_via_residue(f, 256) - c) < 1e-9);
    }
    // an integer flux with a' = 0 at the crossing point touches zero without crossing
    FluxFamily touch = FluxFamily::from_half({{0, 0.5}, {1, 0.25}});
    SpectralFlowRecord r = spectral_flow(touch, 1024);
    CHECK(r.total == 0);
    CHECK(r.crossings.empty());
    CHECK(r.tangential.size() >= 1);
}

TEST_CASE("crossings of a non-winding family cancel") {
    FluxFamily f = FluxFamily::from_half({{1, cplx(0.0, -0.3)}});
    SpectralFlowRecord r = spectral_flow(f, 1024);
    CHECK(r.total == 0);
    REQUIRE(r.crossings.size() == 2);
    CHECK(r.crossings[0].direction == -r.crossings[1].direction);
    CHECK(std::abs(std::sin(r.crossings[0].theta)) < 1e-9);
}

TEST_CASE("connection form sampling") {
    Family f = FluxFamily::from_half({{0, 0.3}, {1, 0.05}});
    ConnectionFormSample c = bf_form(f, {cplx(2.0), cplx(3.0)}, 64);
    CHECK(c.theta.size() == 64);
    CHECK(c.values.size() == 2);
    CHECK(std::abs(c.values[1][5] - bf_value(f, c.theta[5], 3.0)) < 1e-14);
    CHECK_THROWS_AS(bf_form(f, {cplx(2.0)}, 100), DomainError);
    std::string csv = connection_form_csv(c);
    CHECK(csv.rfind("s_re,s_im,theta,re_A,im_A", 0) == 0);
}
