#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "adlim/errors.hpp"
#include "adlim/lab.hpp"

using namespace adlim;

TEST_CASE("closing sum against brute force") {
    boost::math::quadrature::tanh_sinh<double> q;
    for (double s : {1.5, 3.0}) {
        const double t = 0.1;
        const int N = 400000;
        double acc = 1.0;
        for (int k = N; k >= 1; --k) acc += 2.0 * std::pow(t * t * double(k) * k + 1.0, -0.5 * s);
        double tail = q.integrate([&](double x) { return std::pow(t * t * x * x + 1.0, -0.5 * s); }, double(N),
                                  std::numeric_limits<double>::infinity());
        double g = std::pow(t * t * double(N) * N + 1.0, -0.5 * s);
        acc += 2.0 * (tail - 0.5 * g);
        LimitSample c = closing_sum(t, s);
        CHECK(std::abs(c.value - t * acc) < 1e-9 * t * acc);
    }
    CHECK_THROWS_AS(closing_sum(0.1, 1.0), RegionError);
}

TEST_CASE("log counterexample carries the log t term") {
    LimitReport r = run_log_counterexample(0.3);
    REQUIRE(r.has_log_fit);
    CHECK(std::abs(r.log_fit.log_coefficient + 0.4) < 1e-8);
    CHECK(r.pass);
}

TEST_CASE("closing identity report") {
    LimitReport r = run_closing_identity(2.0);
    CHECK(r.pass);
    CHECK(std::abs(r.limit - kPi) < 1e-8);
    nlohmann::json j = nlohmann::json::parse(to_json(r));
    for (const char* key : {"experiment", "family", "t_grid", "samples", "fit", "log_fit", "limit", "limit_error",
                            "reference", "reference_provenance", "abs_deviation", "rel_deviation", "tolerance",
                            "checks", "verdict"})
        CHECK(j.contains(key));
    CHECK(j["verdict"] == "pass");
    CHECK(to_csv(r).rfind("t,value,error\n", 0) == 0);
}

TEST_CASE("tightened tolerances turn a pass into a failure") {
    SweepOptions o;
    o.tol = default_tolerances().scaled(1e-12);
    CHECK_FALSE(run_closing_identity(3.0, o).pass);
    CHECK_THROWS_AS(default_tolerances().scaled(0.0), DomainError);
}

TEST_CASE("criterion lookup") {
    CHECK(criterion_id("closing-identity") == 2);
    CHECK(criterion_id("9") == 9);
    CHECK(criterion_id("nope") == 0);
    CHECK(criterion_keys().size() == 9);
}

TEST_CASE("spectral flow report for winding 2") {
    SweepOptions o;
    LimitReport r = run_spectral_flow(FluxFamily::from_half({{0, 0.1}}, 2), o);
    CHECK(r.pass);
    CHECK(r.limit == 2.0);
}

TEST_CASE("pzl sign: t log det is positive for a constant half flux") {
    SweepOptions o;
    o.t_grid = {0.2, 0.1, 0.05, 0.04};
    LimitReport r = run_corollary_pzl(FluxFamily::from_half({{0, 0.5}}), o);
    CHECK(r.pass);
    CHECK(std::abs(r.limit - kPi / 6.0) < 1e-5);
}
