#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "adlim/detbundle.hpp"
#include "adlim/errors.hpp"
#include "adlim/lab.hpp"
#include "adlim/specfun.hpp"

#ifndef ADLIM_FAMILY_DIR
#define ADLIM_FAMILY_DIR "families"
#endif

namespace adlim {

namespace {

const std::vector<std::string> kKeys{"special-functions", "closing-identity", "theorem-mz",
                                     "theorem-eil",       "corollary-pzl",    "holonomy",
                                     "spectral-flow",     "log-discriminator", "robustness"};

Family load(const SuiteOptions& opt, const std::string& name) {
    std::string dir = opt.family_dir.empty() ? default_family_dir() : opt.family_dir;
    return load_family(dir + "/" + name + ".json");
}

SweepOptions sweep(const SuiteOptions& opt) {
    SweepOptions s;
    s.theta_grid = opt.theta_grid;
    s.tol = opt.tol;
    return s;
}

LimitReport check_report(const std::string& id, const std::string& family = {}) {
    LimitReport r;
    r.id = id;
    r.family_name = family;
    return r;
}

// f_weight against a Gauss-Legendre quadrature of the defining integral, written as
// the integral of cos^{2s-2} over (-pi/2, pi/2) after tau = tan u.
double f_weight_quadrature_error(cplx s) {
    QuadratureRule q = composite_gauss(-0.5 * kPi, 0.5 * kPi, 32, 24);
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i < q.nodes.size(); ++i)
        acc.add(q.weights[i] * std::exp((2.0 * s - 2.0) * std::log(std::cos(q.nodes[i]))));
    cplx f = f_weight(s);
    return std::abs(f - acc.value()) / std::abs(f);
}

CriterionResult special_functions(const SuiteOptions& opt) {
    CriterionResult c;
    LimitReport r = check_report("special_functions");
    for (cplx s : {cplx(1.0), cplx(2.0), cplx(3.5), cplx(2.0, 1.0)}) {
        std::ostringstream name;
        name << "f_weight(" << s.real() << (s.imag() != 0.0 ? "+1i" : "") << ") vs quadrature (relative)";
        r.add_check(name.str(), f_weight_quadrature_error(s), opt.tol.special_relative);
    }
    r.add_check("|zeta(0) + 1/2|", std::abs(riemann_zeta(0.0) + 0.5), opt.tol.special_absolute);
    // zeta_H(-1, a) = -B_2(a) / 2
    double b2 = 0.25 * 0.25 - 0.25 + 1.0 / 6.0;
    r.add_check("|zeta_H(-1, 0.25) + B_2(0.25)/2|", std::abs(hurwitz_zeta(-1.0, 0.25) + 0.5 * b2),
                opt.tol.hurwitz_absolute);
    r.finalize();
    c.reports.push_back(r);
    return c;
}

CriterionResult robustness(const SuiteOptions& opt) {
    CriterionResult c;
    const double tol = opt.tol.robustness;

    // holonomy of the stabilized line under changes of cover and bumps
    for (const char* name : {"flux_crossing", "matrix_cs"}) {
        Family f = load(opt, name);
        LimitReport r = check_report("holonomy_cover_invariance", name);
        // D_U is only piecewise smooth, so the comparison uses a doubled grid
        const int grid = 2 * opt.theta_grid;
        cplx base = holonomy(stabilize(f), grid);
        std::vector<std::pair<std::string, StabilizeOptions>> variants;
        StabilizeOptions v;
        v.choice = StabilizeOptions::LevelChoice::LongestArc;
        variants.push_back({"longest-arc levels", v});
        for (double ov : {0.15, 0.3}) {
            v = {};
            v.overlap_fraction = ov;
            variants.push_back({"bump overlap " + std::to_string(ov).substr(0, 4), v});
        }
        v = {};
        v.grid_points = 1080;
        variants.push_back({"finer cover grid", v});
        v = {};
        v.seed = 777;
        variants.push_back({"other cokernel frame", v});
        for (auto& [label, o] : variants) {
            cplx h = holonomy(stabilize(f, o), grid);
            r.add_check("|hol change| " + label, std::abs(h - base), tol);
        }
        r.finalize();
        c.reports.push_back(r);
    }

    // adding one zero mode raises zeta bar and eta bar at 0 by exactly 1
    {
        Family f = load(opt, "flux_half");
        LimitReport r = check_report("kernel_shift", family_name(f));
        auto d = delta_sample(f, 0.1);
        std::vector<double> ev = d->spectrum->eigenvalues;
        SpectralInput plain = make_input(ev, *d->tail, 0.1);
        ev.push_back(0.0);
        std::sort(ev.begin(), ev.end());
        SpectralInput shifted = make_input(ev, *d->tail, 0.1);
        for (SpectralFunction w : {SpectralFunction::Zeta, SpectralFunction::Eta}) {
            double a = continue_to_zero(plain, *d->tail, w).regularized;
            double b = continue_to_zero(shifted, *d->tail, w).regularized;
            r.add_check(w == SpectralFunction::Zeta ? "|zeta bar shift - 1|" : "|eta bar shift - 1|",
                        std::abs(b - a - 1.0), tol);
        }
        r.finalize();
        c.reports.push_back(r);
    }

    // Hermiticity of the truncations and the exact block law for a constant flux
    {
        LimitReport r = check_report("assembly_invariants");
        for (const char* name : {"flux_sin", "matrix_cs", "winding1"}) {
            Family f = load(opt, name);
            double t = std::holds_alternative<MatrixLoop>(f) ? 1.0 : 0.1;
            AssembledOperator op = assemble_delta_t(f, t, 8, 16);
            double defect = 0.0;
            for (std::size_t i = 0; i < op.block_count(); ++i) {
                CMatrix b = op.block_dense(i);
                defect = std::max(defect, hermiticity_defect(b) / std::max(b.max_abs(), 1e-300));
            }
            r.add_check(std::string("relative Hermiticity defect, ") + name, defect, opt.tol.hermiticity);
        }
        Family half = load(opt, "flux_half");
        const double t = 0.1;
        const int K = 8, M = 40;
        AssembledOperator op = assemble_delta_t(half, t, K, M);
        r.add_check("fiber blocks decouple (block count mismatch)",
                    std::abs(static_cast<double>(op.block_count()) - (2 * K + 1)), 0.0);
        std::vector<double> law;
        for (int k = -K; k <= K; ++k)
            for (int m = -M; m <= M; ++m) {
                double v = std::hypot(t * m, k + 0.5);
                law.push_back(v);
                law.push_back(-v);
            }
        std::sort(law.begin(), law.end());
        std::vector<double> ev = spectrum(op).eigenvalues;
        double dev = ev.size() == law.size() ? 0.0 : std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ev.size() && i < law.size(); ++i) dev = std::max(dev, std::abs(ev[i] - law[i]));
        r.add_check("block law +-sqrt(t^2 m^2 + (k+a)^2), max abs deviation", dev, opt.tol.invariant);
        r.finalize();
        c.reports.push_back(r);
    }
    return c;
}

// The failing checks, or the check closest to its threshold.
std::string summarize(const CriterionResult& c) {
    std::ostringstream os;
    os << std::setprecision(3);
    const LimitReport* worst_r = nullptr;
    const Check* worst = nullptr;
    double worst_ratio = -1.0;
    int shown = 0;
    for (const LimitReport& r : c.reports)
        for (const Check& k : r.checks) {
            std::string where = r.family_name.empty() ? r.id : r.id + "[" + r.family_name + "]";
            if (!k.pass) {
                if (shown++) os << "; ";
                os << where << ": " << k.name << " = " << k.value << " vs " << k.threshold;
                continue;
            }
            double ratio = k.threshold > 0.0 ? k.value / k.threshold : (k.value == 0.0 ? 0.0 : 1.0);
            if (ratio > worst_ratio && k.value <= k.threshold) {
                worst_ratio = ratio;
                worst = &k;
                worst_r = &r;
            }
        }
    if (shown == 0 && worst)
        os << c.reports.size() << " report(s); tightest: " << worst_r->id << " " << worst->name << " = " << worst->value
           << " vs " << worst->threshold;
    return os.str();
}

}  // namespace

std::string default_family_dir() { return ADLIM_FAMILY_DIR; }

const std::vector<std::string>& criterion_keys() { return kKeys; }

int criterion_id(const std::string& key) {
    for (std::size_t i = 0; i < kKeys.size(); ++i)
        if (kKeys[i] == key || std::to_string(i + 1) == key) return static_cast<int>(i) + 1;
    return 0;
}

CriterionResult run_criterion(int id, const SuiteOptions& opt) {
    if (id < 1 || id > static_cast<int>(kKeys.size())) throw ConfigError("unknown criterion " + std::to_string(id));
    auto t0 = std::chrono::steady_clock::now();
    CriterionResult c;
    SweepOptions sw = sweep(opt);
    switch (id) {
        case 1:
            c = special_functions(opt);
            break;
        case 2:
            for (double s : {2.0, 3.0}) c.reports.push_back(run_closing_identity(s, sw));
            break;
        case 3:
            c.reports.push_back(run_theorem_mz(load(opt, "flux_sin"), 4.0, sw));
            break;
        case 4:
            c.reports.push_back(run_theorem_eil(load(opt, "flux_sin"), 3.0, sw));
            break;
        case 5:
            c.reports.push_back(run_corollary_pzl(load(opt, "flux_half"), sw));
            break;
        case 6:
            c.reports.push_back(run_holonomy(load(opt, "flux_sin"), sw));
            c.reports.push_back(run_holonomy(load(opt, "matrix_cs"), sw));
            break;
        case 7:
            for (const char* name : {"winding_m1", "winding1", "winding2"})
                c.reports.push_back(run_spectral_flow(std::get<FluxFamily>(load(opt, name)), sw));
            break;
        case 8: {
            // smooth sweeps: the closing identity and a constant flux; the e^{-pi/t} corrections
            // of the latter stay below the noise only for t <= 0.1
            LimitReport closing = run_closing_identity(3.0, sw);
            SweepOptions small = sw;
            small.t_grid = {0.1, 0.08, 0.065, 0.05, 0.04, 0.03, 0.025};
            LimitReport flux = run_theorem_mz(load(opt, "flux_half"), 5.0, small);
            for (LimitReport* r : {&closing, &flux}) {
                std::erase_if(r->checks, [](const Check& k) { return k.name != "log-t coefficient / sigma"; });
                r->id = "log_discriminator_smooth:" + r->id;
                r->finalize();
                c.reports.push_back(*r);
            }
            c.reports.push_back(run_log_counterexample(0.3, sw));
            break;
        }
        case 9:
            c = robustness(opt);
            break;
    }
    c.id = id;
    c.key = kKeys[id - 1];
    c.pass = !c.reports.empty();
    for (const LimitReport& r : c.reports) c.pass = c.pass && r.pass;
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.summary = summarize(c);
    return c;
}

}  // namespace adlim
