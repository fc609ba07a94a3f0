// Acceptance suite: one line per criterion, exit 0 iff all pass.
// Criterion 1 is additionally checked against Boost.Math.

#include <cmath>
#include <cstdio>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "adlim/errors.hpp"
#include "adlim/lab.hpp"
#include "adlim/specfun.hpp"

using namespace adlim;

namespace {

void boost_oracles(CriterionResult& c, const ToleranceTable& tol) {
    LimitReport r;
    r.id = "special_functions_boost";
    boost::math::quadrature::tanh_sinh<double> q;
    const double inf = std::numeric_limits<double>::infinity();
    for (cplx s : {cplx(1.0), cplx(2.0), cplx(3.5), cplx(2.0, 1.0)}) {
        double re = q.integrate([&](double x) { return std::exp(-s * std::log1p(x * x)).real(); }, -inf, inf);
        double im = s.imag() == 0.0
                        ? 0.0
                        : q.integrate([&](double x) { return std::exp(-s * std::log1p(x * x)).imag(); }, -inf, inf);
        cplx f = f_weight(s);
        r.add_check("f_weight vs tanh-sinh at s=" + std::to_string(s.real()) + "+" + std::to_string(s.imag()) + "i",
                    std::abs(f - cplx(re, im)) / std::abs(f), tol.special_relative);
    }
    r.add_check("zeta(0) vs Boost", std::abs(riemann_zeta(0.0).real() - boost::math::zeta(0.0)),
                tol.special_absolute);
    r.finalize();
    c.reports.push_back(r);
    c.pass = c.pass && r.pass;
}

}  // namespace

int main(int argc, char** argv) {
    SuiteOptions opt;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--family-dir") opt.family_dir = argv[i + 1];
    bool all = true;
    for (int id = 1; id <= static_cast<int>(criterion_keys().size()); ++id) {
        CriterionResult c;
        try {
            c = run_criterion(id, opt);
            if (id == 1) boost_oracles(c, opt.tol);
        } catch (const Error& e) {
            c.id = id;
            c.key = criterion_keys()[id - 1];
            c.summary = std::string("error: ") + e.what();
        }
        std::printf("criterion %d %-18s %s  [%.1f s]  %s\n", id, c.key.c_str(), c.pass ? "PASS" : "FAIL", c.seconds,
                    c.summary.c_str());
        std::fflush(stdout);
        all = all && c.pass;
    }
    std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all ? 0 : 1;
}
