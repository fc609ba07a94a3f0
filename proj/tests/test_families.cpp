#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "adlim/errors.hpp"
#include "adlim/families.hpp"
#include "adlim/specfun.hpp"

using namespace adlim;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_family(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

// sum over k in Z of |k + a|^-s for s > 1, direct with an integral tail
double lattice_power(double a, double s) {
    const int N = 20000;
    double acc = 0.0;
    for (int k = -N; k <= N; ++k) acc += std::pow(std::abs(k + a), -s);
    double x = N + 0.5;
    return acc + 2.0 * std::pow(x, 1.0 - s) / (s - 1.0);
}

MatrixLoop cos_sin_loop() {
    return std::get<MatrixLoop>(parse_family(R"({"type": "matrix_loop", "rows": 1, "cols": 2, "fourier": [
        {"m": 1, "re": [[0.5, 0.0]], "im": [[0.0, -0.5]]}, {"m": -1, "re": [[0.5, 0.0]], "im": [[0.0, 0.5]]}]})"));
}

}  // namespace

TEST_CASE("malformed family files name the violated invariant") {
    CHECK(error_of("{") .find("malformed JSON") != std::string::npos);
    CHECK(error_of(R"({"type": "flux", "fourier": [[0, 0.5, 0.1]]})").find("reality") != std::string::npos);
    CHECK(error_of(R"({"type": "flux", "fourier": [[1, 0.1, 0.0], [-1, 0.2, 0.0]]})").find("reality") !=
          std::string::npos);
    CHECK(error_of(R"({"type": "flux", "fourier": [], "colour": 1})").find("colour") != std::string::npos);
    CHECK(error_of(R"({"type": "spin"})").find("type") != std::string::npos);
    CHECK(error_of(R"({"type": "matrix_loop", "rows": 2, "cols": 1, "fourier": [{"m": 0, "re": [[1.0]]}]})")
              .find("rows") != std::string::npos);
    CHECK(error_of(R"({"type": "flux", "metric": "warped", "fourier": []})").find("product") != std::string::npos);
    CHECK_THROWS_AS(load_family("/nonexistent/family.json"), ConfigError);
}

TEST_CASE("canonical JSON round-trips and the hash is stable") {
    Family f = parse_family(R"({"type": "flux", "name": "s", "fourier": [[0, 0.5, 0.0], [1, 0.0, -0.1]]})");
    Family g = parse_family(family_to_json(f));
    CHECK(family_hash(f) == family_hash(g));
    CHECK(family_to_json(f) == family_to_json(g));
    Family h = parse_family(R"({"type": "flux", "name": "s", "fourier": [[0, 0.5, 0.0], [1, 0.0, -0.1000001]]})");
    CHECK(family_hash(f) != family_hash(h));
    Family m = cos_sin_loop();
    CHECK(family_hash(parse_family(family_to_json(m))) == family_hash(m));
}

TEST_CASE("flux profile and derivative") {
    FluxFamily f = FluxFamily::from_half({{0, 0.5}, {1, cplx(0.0, -0.1)}, {2, cplx(0.03, 0.02)}});
    for (double th : {0.0, 0.7, 2.2, 5.9}) {
        double expect = 0.5 + 0.2 * std::sin(th) + 2.0 * (0.03 * std::cos(2 * th) - 0.02 * std::sin(2 * th));
        CHECK(std::abs(f.a(th) - expect) < 1e-14);
        double h = 1e-5;
        CHECK(std::abs(f.a_prime(th) - (f.a(th + h) - f.a(th - h)) / (2 * h)) < 1e-8);
    }
    CHECK(f.max_abs_a() >= 0.5 + 0.2);
}

TEST_CASE("fiber spectral functions of a flux family against lattice sums") {
    Family f = FluxFamily::from_half({{0, 0.3}});
    for (double s : {3.0, 4.5}) {
        double zb = boost::math::tgamma(0.5 * s) * lattice_power(0.3, s);
        CHECK(std::abs(fiber_zeta_bar(f, 1.0, s) - zb) < 1e-9 * zb);
    }
    // eta(0) = zeta_H(0, a) - zeta_H(0, 1 - a) = 1 - 2a
    CHECK(std::abs(fiber_eta_bar(f, 0.0, 0.0) - 0.4) < 1e-12);
    // zeta(-1) of |k + 1/2| is 2 zeta_H(-1, 1/2) = 1/12
    Family half = FluxFamily::from_half({{0, 0.5}});
    CHECK(std::abs(tr_zeta_abs(half, 0.0) - 1.0 / 12.0) < 1e-12);
    CHECK(std::abs(tr_w_abs(half, 0.0)) < 1e-9);
    Family integer = FluxFamily::from_half({{0, 1.0}});
    CHECK(fiber_eta_bar(integer, 0.0, 2.0) == cplx(1.0));
    CHECK_THROWS_AS(tr_zeta_abs(integer, 0.0), KernelPresent);
}

TEST_CASE("flux fraction") {
    bool ker = false;
    CHECK(std::abs(flux_fraction(2.25, &ker) - 0.25) < 1e-15);
    CHECK_FALSE(ker);
    CHECK(std::abs(flux_fraction(-0.25, &ker) - 0.75) < 1e-15);
    flux_fraction(-3.0, &ker);
    CHECK(ker);
}

TEST_CASE("matrix loops") {
    MatrixLoop m = cos_sin_loop();
    CHECK(m.index() == 1);
    CHECK_FALSE(m.hermitian());
    for (double th : {0.0, 1.0, 4.0}) {
        CMatrix d = m.at(th);
        CHECK(std::abs(d(0, 0) - std::cos(th)) < 1e-15);
        CHECK(std::abs(d(0, 1) - std::sin(th)) < 1e-15);
        CHECK(std::abs(m.derivative(th)(0, 0) + std::sin(th)) < 1e-15);
    }
    // [cos, sin] has singular value 1 everywhere
    CHECK(std::abs(fiber_zeta_bar(Family(m), 0.4, 3.0) - (boost::math::tgamma(1.5) + 1.0)) < 1e-12);
    CHECK_THROWS_AS(fiber_eta_bar(Family(m), 0.0, 3.0), NotSelfAdjoint);
}

TEST_CASE("stabilization makes non-invertible loops invertible and keeps the index") {
    Family cs = cos_sin_loop();
    StabilizedFamily s = stabilize(cs);
    CHECK(s.index() == 1);
    CHECK(min_singular_value(s) > 1e-3);
    Family crossing = FluxFamily::from_half({{1, cplx(0.0, -0.3)}});
    StabilizedFamily c = stabilize(crossing);
    CHECK(c.index() == 0);
    CHECK_FALSE(c.empty());
    CHECK(min_singular_value(c) > 1e-3);
    // D_U' is the derivative of D_U away from the bump breakpoints
    double th = 0.5 * (c.breakpoints[0] + c.breakpoints[1]);
    double h = 1e-5;
    CMatrix fd = (1.0 / (2 * h)) * (c.d_u(th + h) - c.d_u(th - h));
    CHECK((fd - c.d_u_prime(th)).max_abs() < 1e-6);
}

TEST_CASE("winding families cannot be stabilized by a periodic cover") {
    Family w = FluxFamily::from_half({{0, 0.1}}, 1);
    CHECK_THROWS_AS(stabilize(w), CoverFailure);
}
