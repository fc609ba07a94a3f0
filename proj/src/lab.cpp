#include "adlim/lab.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adlim/detbundle.hpp"
#include "adlim/errors.hpp"

namespace adlim {

ToleranceTable ToleranceTable::scaled(double f) const {
    if (!(f > 0.0)) throw DomainError("tolerance scale must be positive");
    ToleranceTable t = *this;
    for (double* p : {&t.special_relative, &t.special_absolute, &t.hurwitz_absolute, &t.closing_deviation,
                      &t.closing_log, &t.closing_edge, &t.mz_relative, &t.mz_linear, &t.eil_relative, &t.eil_t_eta,
                      &t.pzl_zeta, &t.pzl_log_det, &t.holonomy_phase, &t.holonomy_exact, &t.holonomy_matrix,
                      &t.flow_float, &t.robustness, &t.invariant, &t.hermiticity})
        *p *= f;
    t.log_sigma_smooth *= f;
    t.log_sigma_rough /= f;
    return t;
}

const ToleranceTable& default_tolerances() {
    static const ToleranceTable t;
    return t;
}

const std::vector<double>& default_t_grid() {
    static const std::vector<double> g{0.2, 0.1, 0.05, 0.025};
    return g;
}

// The t-expansion of t zeta bar is even with a large t^2 coefficient; the linear coefficient
// is only resolved on a dense small-t grid.
const std::vector<double>& mz_t_grid() {
    static const std::vector<double> g{0.05, 0.045, 0.04, 0.035, 0.03, 0.025, 0.02, 0.016, 0.013, 0.01};
    return g;
}

// ---------------------------------------------------------------- reports

void LimitReport::add_check(const std::string& name, double value, double threshold, bool pass_if_below) {
    bool ok = pass_if_below ? value <= threshold : value >= threshold;
    if (!std::isfinite(value)) ok = false;
    checks.push_back({name, value, threshold, ok});
}

void LimitReport::finalize() {
    pass = !checks.empty();
    for (const Check& c : checks) pass = pass && c.pass;
}

namespace {

nlohmann::json cjson(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

nlohmann::json fit_json(const TaylorFit& f, int order) {
    nlohmann::json j;
    j["order"] = order;
    j["coefficients"] = f.coefficients;
    j["std_errors"] = f.std_errors;
    j["residual"] = f.residual;
    j["condition"] = f.condition;
    if (f.with_log) {
        j["log_coefficient"] = f.log_coefficient;
        j["log_std_error"] = f.log_std_error;
        j["t_log_coefficient"] = f.t_log_coefficient;
        j["t_log_std_error"] = f.t_log_std_error;
    }
    return j;
}

}  // namespace

std::string to_json(const LimitReport& r) {
    using nlohmann::json;
    json j;
    j["experiment"] = r.id;
    j["family"] = r.family_name;
    j["family_hash"] = r.family_hash;
    j["s"] = cjson(r.s);
    json samples = json::array();
    json grid = json::array();
    for (const LimitSample& s : r.samples) {
        samples.push_back({{"t", s.t}, {"value", s.value}, {"error", s.error}});
        grid.push_back(s.t);
    }
    j["t_grid"] = grid;
    j["samples"] = samples;
    j["fit"] = r.fit_order >= 0 ? fit_json(r.fit, r.fit_order) : json(nullptr);
    j["log_fit"] = r.has_log_fit ? fit_json(r.log_fit, r.log_fit_order) : json(nullptr);
    j["limit"] = r.limit;
    j["limit_error"] = r.limit_error;
    j["limit_without_largest_t"] = r.limit_without_largest_t;
    j["reference"] = cjson(r.reference);
    j["reference_provenance"] = r.reference_provenance;
    j["abs_deviation"] = r.abs_deviation;
    j["rel_deviation"] = r.rel_deviation;
    j["tolerance"] = r.tolerance;
    json checks = json::array();
    for (const Check& c : r.checks)
        checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
    j["checks"] = checks;
    j["notes"] = r.notes;
    j["verdict"] = r.pass ? "pass" : "fail";
    return j.dump(2);
}

std::string to_text(const LimitReport& r) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << "  family=" << r.family_name;
    if (r.s != cplx(0.0)) os << "  s=" << r.s.real() << (r.s.imag() != 0.0 ? "+" + std::to_string(r.s.imag()) + "i" : "");
    os << "\n  limit " << r.limit << " +- " << std::setprecision(3) << r.limit_error << std::setprecision(10)
       << "   reference " << r.reference.real();
    if (r.reference.imag() != 0.0) os << (r.reference.imag() < 0 ? "" : "+") << r.reference.imag() << "i";
    os << "  (" << r.reference_provenance << ")\n";
    os << std::setprecision(3) << "  deviation abs " << r.abs_deviation << " rel " << r.rel_deviation << "  tolerance "
       << r.tolerance << "\n";
    for (const Check& c : r.checks)
        os << "  " << (c.pass ? "ok  " : "FAIL") << " " << c.name << ": " << c.value << " (threshold " << c.threshold
           << ")\n";
    for (const std::string& n : r.notes) os << "  note: " << n << "\n";
    return os.str();
}

std::string to_csv(const LimitReport& r) {
    std::ostringstream os;
    os << std::setprecision(17) << "t,value,error\n";
    for (const LimitSample& s : r.samples) os << s.t << ',' << s.value << ',' << s.error << '\n';
    return os.str();
}

// ---------------------------------------------------------------- fits

AdaptiveFit adaptive_taylor(const std::vector<LimitSample>& samples, bool with_log, int min_order) {
    std::vector<double> t, v, e;
    for (const LimitSample& s : samples) {
        t.push_back(s.t);
        v.push_back(s.value);
        e.push_back(s.error);
    }
    const int n = static_cast<int>(t.size());
    const int distinct = static_cast<int>(std::set<double>(t.begin(), t.end()).size());
    AdaptiveFit best;
    for (int J = std::max(0, min_order);; ++J) {
        const int p = J + 1 + (with_log ? 2 : 0);
        if (distinct < J + 3 || n < p) break;
        if (best.order >= 0 && n - p < 1) break;
        TaylorFit f;
        try {
            f = taylor_in_t(t, v, J, with_log, e);
        } catch (const IllConditioned&) {
            break;
        }
        double chi2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double pred = 0.0;
            for (int j = 0; j <= J; ++j) pred += f.coefficients[j] * std::pow(t[i], j);
            if (with_log) pred += f.log_coefficient * std::log(t[i]) + f.t_log_coefficient * t[i] * std::log(t[i]);
            double r = (v[i] - pred) / e[i];
            chi2 += r * r;
        }
        best.fit = f;
        best.order = J;
        best.reduced_chi2 = n > p ? chi2 / (n - p) : 0.0;
        if (best.reduced_chi2 <= 2.0) break;
    }
    if (best.order < 0) throw DomainError("adaptive_taylor: too few samples for any fit");
    return best;
}

namespace {

double error_floor(double value, double err) { return std::max(err, 1e-12 * std::max(std::abs(value), 1.0)); }

double log_significance(const TaylorFit& f) {
    if (f.log_std_error > 0.0) return std::abs(f.log_coefficient) / f.log_std_error;
    return std::abs(f.log_coefficient) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

std::vector<LimitSample> drop_largest_t(std::vector<LimitSample> s) {
    auto it = std::max_element(s.begin(), s.end(), [](auto& a, auto& b) { return a.t < b.t; });
    s.erase(it);
    return s;
}

// Polynomial fit, log fit and the stability refit on the report's samples.
void fit_report(LimitReport& r, int min_order, bool log_fit) {
    AdaptiveFit a = adaptive_taylor(r.samples, false, min_order);
    r.fit = a.fit;
    r.fit_order = a.order;
    r.limit = a.fit.coefficients[0];
    r.limit_error = a.fit.std_errors[0];
    std::ostringstream os;
    os << "polynomial order " << a.order << " in t, reduced chi^2 " << std::setprecision(3) << a.reduced_chi2;
    r.notes.push_back(os.str());
    try {
        // a short grid only supports a constant refit once a point is dropped
        std::vector<LimitSample> rest = drop_largest_t(r.samples);
        int order = std::min(min_order, static_cast<int>(rest.size()) - 3);
        r.limit_without_largest_t = adaptive_taylor(rest, false, std::max(order, 0)).fit.coefficients[0];
    } catch (const Error&) {
        r.limit_without_largest_t = std::numeric_limits<double>::quiet_NaN();
        r.notes.push_back("stability refit without the largest t not possible");
    }
    if (log_fit) {
        try {
            AdaptiveFit l = adaptive_taylor(r.samples, true, 1);
            r.has_log_fit = true;
            r.log_fit = l.fit;
            r.log_fit_order = l.order;
        } catch (const Error& e) {
            r.notes.push_back(std::string("log fit unavailable: ") + e.what());
        }
    }
}

void set_deviation(LimitReport& r, double scale_floor) {
    r.abs_deviation = std::abs(cplx(r.limit) - r.reference);
    r.rel_deviation = r.abs_deviation / std::max(std::abs(r.reference), scale_floor);
}

void add_stability_check(LimitReport& r) {
    if (!std::isfinite(r.limit_without_largest_t)) return;
    double d = std::abs(r.limit_without_largest_t - r.limit) / std::max(std::abs(r.reference), 1.0);
    r.add_check("limit stable without largest t (relative)", d, 2.0 * r.tolerance);
}

// A log coefficient below kLogNegligible is reported as 0 sigma: on a vanishing signal the
// ratio only measures round-off.
constexpr double kLogNegligible = 1e-9;

void add_log_check(LimitReport& r, double max_sigma) {
    if (!r.has_log_fit) return;
    double sig = std::abs(r.log_fit.log_coefficient) <= kLogNegligible ? 0.0 : log_significance(r.log_fit);
    r.add_check("log-t coefficient / sigma", sig, max_sigma);
}

double theta_integral(const std::function<double(double)>& g, int n) {
    CompensatedSum<double> acc;
    for (int i = 0; i < n; ++i) acc.add(g(kTwoPi * i / n));
    return acc.value() * kTwoPi / n;
}

cplx theta_integral_c(const std::function<cplx(double)>& g, int n) {
    CompensatedSum<cplx> acc;
    for (int i = 0; i < n; ++i) acc.add(g(kTwoPi * i / n));
    return acc.value() * (kTwoPi / n);
}

LimitReport new_report(const std::string& id, const Family* f, cplx s) {
    LimitReport r;
    r.id = id;
    r.s = s;
    if (f) {
        r.family_name = family_name(*f);
        r.family_hash = family_hash(*f);
    }
    return r;
}

std::mutex g_cache_mutex;
std::map<std::string, std::shared_ptr<const TotalSpectrum>> g_cache;

}  // namespace

// ---------------------------------------------------------------- delta_t samples

std::unique_ptr<TailModel> make_tail(const Family& f, double t, int K, const SmoothCutoff& cut) {
    if (auto* fl = std::get_if<FluxFamily>(&f)) return std::make_unique<FluxTail>(*fl, t, K, cut);
    return std::make_unique<MatrixLoopTail>(std::get<MatrixLoop>(f), t, cut);
}

void clear_spectrum_cache() {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    g_cache.clear();
}

std::unique_ptr<DeltaSample> delta_sample(const Family& f, double t, double window, std::optional<int> fixed_M) {
    auto out = std::make_unique<DeltaSample>();
    out->t = t;
    out->truncation = heuristic_truncation(f, t, window);
    double eff = out->truncation.window;
    if (fixed_M) {
        out->truncation.M = *fixed_M;
        eff = std::min(eff, 0.9 * t * *fixed_M);
    }
    std::ostringstream key;
    key << family_hash(f) << '|' << std::setprecision(17) << t << '|' << out->truncation.K << '|' << out->truncation.M;
    {
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        auto it = g_cache.find(key.str());
        if (it != g_cache.end()) out->spectrum = it->second;
    }
    if (!out->spectrum) {
        auto sp = std::make_shared<TotalSpectrum>(
            spectrum(assemble_delta_t(f, t, out->truncation.K, out->truncation.M)));
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        g_cache[key.str()] = sp;
        out->spectrum = sp;
    }
    out->tail = make_tail(f, t, out->truncation.K, SmoothCutoff::for_window(eff, 0.75));
    out->alt_tail = make_tail(f, t, out->truncation.K, SmoothCutoff::for_window(eff, 0.65));
    out->input = make_input(*out->spectrum, *out->tail);
    out->alt_input = make_input(*out->spectrum, *out->alt_tail);
    return out;
}

// ---------------------------------------------------------------- experiments

LimitReport run_theorem_mz(const Family& f, double s, const SweepOptions& opt) {
    LimitReport r = new_report("theorem_mz", &f, s);
    const auto& grid = opt.t_grid.empty() ? mz_t_grid() : opt.t_grid;
    for (double t : grid) {
        auto d = delta_sample(f, t, opt.window, opt.fixed_M);
        Regularized z = zeta_bar_direct(d->input, *d->tail, s, &d->alt_input, d->alt_tail.get());
        double v = t * z.value.real();
        r.samples.push_back({t, v, error_floor(v, t * z.error)});
    }
    r.reference = theta_integral([&](double th) { return fiber_zeta_bar(f, th, s - 1.0).real(); }, opt.theta_grid) /
                  kSqrtPi;
    r.reference_provenance = "theta quadrature of the fiber zeta bar at s-1, divided by sqrt(pi)";
    r.tolerance = opt.tol.mz_relative;
    fit_report(r, 2, true);
    set_deviation(r, 0.0);
    r.add_check("relative deviation", r.rel_deviation, opt.tol.mz_relative);
    double c1 = r.fit.coefficients.size() > 1 ? r.fit.coefficients[1] : 0.0;
    r.add_check("|linear-in-t coefficient|", std::abs(c1), opt.tol.mz_linear);
    if (r.fit.std_errors.size() > 1) {
        std::ostringstream os;
        os << "linear coefficient " << c1 << " = " << std::setprecision(3) << c1 / r.fit.std_errors[1] << " sigma";
        r.notes.push_back(os.str());
    }
    add_log_check(r, opt.tol.log_sigma_smooth);
    add_stability_check(r);
    r.finalize();
    return r;
}

LimitReport run_theorem_eil(const Family& f, double s, const SweepOptions& opt) {
    LimitReport r = new_report("theorem_eil", &f, s);
    const auto& grid = opt.t_grid.empty() ? mz_t_grid() : opt.t_grid;
    std::vector<LimitSample> t_eta;
    for (double t : grid) {
        auto d = delta_sample(f, t, opt.window, opt.fixed_M);
        Regularized e = eta_bar_direct(d->input, *d->tail, s, &d->alt_input, d->alt_tail.get());
        double v = e.value.real();
        r.samples.push_back({t, v, error_floor(v, e.error)});
        t_eta.push_back({t, t * v, error_floor(t * v, t * e.error)});
    }
    r.reference = theta_integral_c([&](double th) { return bf_value(f, th, s); }, opt.theta_grid) / cplx(0.0, kPi);
    r.reference_provenance = "theta quadrature of the Bismut-Freed form at s, times 1/(i pi)";
    r.tolerance = opt.tol.eil_relative;
    fit_report(r, 1, true);
    // Relative to max(|reference|, 1): for self-adjoint flux loops both sides vanish.
    set_deviation(r, 1.0);
    r.add_check("deviation relative to max(|reference|, 1)", r.rel_deviation, opt.tol.eil_relative);
    AdaptiveFit te = adaptive_taylor(t_eta, false, 1);
    r.add_check("|lim t eta bar|", std::abs(te.fit.coefficients[0]), opt.tol.eil_t_eta);
    add_log_check(r, opt.tol.log_sigma_smooth);
    add_stability_check(r);
    r.finalize();
    return r;
}

LimitReport run_corollary_pzl(const Family& f, const SweepOptions& opt) {
    LimitReport r = new_report("corollary_pzl", &f, 0.0);
    const auto& grid = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
    std::vector<LimitSample> zeta0;
    for (double t : grid) {
        auto d = delta_sample(f, t, opt.window, opt.fixed_M);
        ContinuationResult h = continue_to_zero(d->input, *d->tail, SpectralFunction::Zeta);
        ContinuationResult c = continue_closed_form(d->input, *d->tail, SpectralFunction::Zeta, 0.0);
        // the two continuation routes bound each other
        double ld = -t * h.derivative;
        r.samples.push_back({t, ld, error_floor(ld, t * (std::abs(h.derivative - c.derivative) + h.error))});
        double z0 = t * h.regularized;
        zeta0.push_back({t, z0, error_floor(z0, t * (std::abs(h.regularized - c.regularized) + h.error))});
    }
    double zeta_minus_one = theta_integral([&](double th) { return tr_zeta_abs(f, th); }, opt.theta_grid);
    double trw = theta_integral([&](double th) { return tr_w_abs(f, th); }, opt.theta_grid);
    r.reference = zeta_minus_one;
    r.reference_provenance =
        "+oint zeta(D(theta), -1) dtheta (Bernoulli closed form); sign fixed by the small-t direct determinant oracle";
    r.tolerance = opt.tol.pzl_log_det;
    fit_report(r, 1, false);
    set_deviation(r, 1.0);
    r.add_check("|lim t log det - reference|", r.abs_deviation, opt.tol.pzl_log_det);
    AdaptiveFit z = adaptive_taylor(zeta0, false, 1);
    r.add_check("|lim t zeta(delta_t, 0) + oint Tr_w|D||", std::abs(z.fit.coefficients[0] + trw), opt.tol.pzl_zeta);
    // with Tr_w |D| = 0 the determinant limit is exp of the zeta(-1) integral alone
    double e = std::abs(std::exp(r.limit) - std::exp(zeta_minus_one)) / std::exp(zeta_minus_one);
    r.add_check("det(delta_t)^t against exp(oint zeta(D,-1)) (relative)", e, opt.tol.pzl_log_det);
    std::ostringstream os;
    os << "oint Tr_w|D| = " << trw << "; lim t zeta(delta_t, 0) = " << z.fit.coefficients[0];
    r.notes.push_back(os.str());
    add_stability_check(r);
    r.finalize();
    return r;
}

LimitReport run_holonomy(const Family& f, const SweepOptions& opt) {
    LimitReport r = new_report("holonomy", &f, 0.0);
    const auto& grid = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
    const bool loop = std::holds_alternative<MatrixLoop>(f);
    std::optional<int> fixed_M = opt.fixed_M;
    if (loop && !fixed_M) fixed_M = 64;

    cplx hol;
    int index = 0;
    bool stabilized = false;
    try {
        hol = holonomy(f, opt.theta_grid);
    } catch (const NotInvertible&) {
        StabilizedFamily sf = stabilize(f);
        hol = holonomy(sf, opt.theta_grid);
        index = sf.index();
        stabilized = true;
    }
    for (double t : grid) {
        auto d = delta_sample(f, t, opt.window, fixed_M);
        ContinuationResult h = continue_to_zero(d->input, *d->tail, SpectralFunction::Eta);
        ContinuationResult c = continue_closed_form(d->input, *d->tail, SpectralFunction::Eta, 0.0);
        r.samples.push_back({t, h.regularized, error_floor(h.regularized, std::abs(h.regularized - c.regularized) + h.error)});
    }
    fit_report(r, 1, false);
    cplx phase = std::exp(cplx(0.0, -kPi * r.limit));
    cplx rhs = (index % 2 == 0 ? 1.0 : -1.0) * hol;
    r.reference = rhs;
    r.reference_provenance = stabilized ? "(-1)^index times holonomy of the stabilized determinant line"
                                        : "holonomy of the Bismut-Freed connection";
    r.tolerance = loop ? opt.tol.holonomy_matrix : opt.tol.holonomy_phase;
    r.abs_deviation = std::abs(phase - rhs);
    r.rel_deviation = r.abs_deviation;
    r.add_check("|exp(-i pi lim eta bar) - (-1)^index hol|", r.abs_deviation, r.tolerance);
    if (!loop && !stabilized) r.add_check("|hol(det D) - 1|", std::abs(hol - 1.0), opt.tol.holonomy_exact);
    std::ostringstream os;
    os << "phase " << phase.real() << (phase.imag() < 0 ? "" : "+") << phase.imag() << "i, index " << index
       << ", holonomy " << hol.real() << (hol.imag() < 0 ? "" : "+") << hol.imag() << "i";
    r.notes.push_back(os.str());
    r.finalize();
    return r;
}

LimitReport run_spectral_flow(const FluxFamily& f, const SweepOptions& opt) {
    Family fam = f;
    LimitReport r = new_report("spectral_flow", &fam, 0.0);
    std::vector<double> grid = opt.t_grid.empty() ? std::vector<double>{0.5, 1.0} : opt.t_grid;
    SpectralFlowRecord sf = spectral_flow(f, opt.theta_grid);
    double res = index_via_residue(f, 256);
    r.limit = sf.total;
    r.reference = res;
    r.reference_provenance = "half the integral of the residue 1-form";
    r.tolerance = opt.tol.flow_float;
    r.abs_deviation = std::abs(res - sf.total);
    r.rel_deviation = r.abs_deviation;
    r.add_check("|index via residue - spectral flow|", r.abs_deviation, opt.tol.flow_float);
    for (double t : grid) {
        PtIndex pi = p_t_index(fam, t, 8, 8);
        r.samples.push_back({t, static_cast<double>(pi.index), 0.0});
        std::ostringstream name;
        name << "|index(P_t) - spectral flow| at t=" << t;
        r.add_check(name.str(), std::abs(pi.index - sf.total), 0.0);
        std::ostringstream os;
        os << "t=" << t << ": ker " << pi.kernel << ", coker " << pi.cokernel << ", largest kernel sigma "
           << pi.largest_kernel_sigma;
        r.notes.push_back(os.str());
    }
    if (!sf.tangential.empty()) r.notes.push_back(std::to_string(sf.tangential.size()) + " tangential touches not counted");
    r.finalize();
    return r;
}

LimitSample closing_sum(double t, double s, double window) {
    if (!(s > 1.0)) throw RegionError("closing_sum: Re s > 1 required");
    if (!(t > 0.0)) throw DomainError("closing_sum: t must be positive");
    const long N = static_cast<long>(std::ceil(window / t));
    auto g = [&](double k) { return std::pow(t * t * k * k + 1.0, -0.5 * s); };
    auto gp = [&](double k) { return -s * t * t * k * std::pow(t * t * k * k + 1.0, -0.5 * s - 1.0); };
    CompensatedSum<double> acc;
    for (long k = N; k >= 1; --k) acc.add(2.0 * g(static_cast<double>(k)));
    acc.add(1.0);
    // integral from N to infinity: x = cot u, then u = v^p to remove the endpoint singularity
    const double X = t * N;
    const double p = 1.0 / (s - 1.0);
    const double vmax = std::pow(std::atan(1.0 / X), 1.0 / p);
    QuadratureRule q = composite_gauss(0.0, vmax, 4, 32);
    double integral = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        double v = q.nodes[i];
        double u = std::pow(v, p);
        integral += q.weights[i] * std::pow(std::sin(u), s - 2.0) * p * std::pow(v, p - 1.0);
    }
    integral /= t;
    // sum_{k > N} g = int_N^inf g - g(N)/2 - g'(N)/12 + remainder
    double tail = integral - 0.5 * g(N) - gp(N) / 12.0;
    acc.add(2.0 * tail);
    double h = 0.5;
    double g3 = (gp(N + h) - 2.0 * gp(N) + gp(N - h)) / (h * h);
    LimitSample out;
    out.t = t;
    out.value = t * acc.value();
    out.error = t * 2.0 * std::abs(g3) / 720.0;
    return out;
}

LimitReport run_closing_identity(double s, const SweepOptions& opt) {
    LimitReport r = new_report("closing_identity", nullptr, s);
    r.family_name = "identity fibration series";
    const auto& grid = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
    const double window = s < 2.0 ? 400.0 : 40.0;
    for (double t : grid) {
        LimitSample x = closing_sum(t, s, window);
        x.error = error_floor(x.value, x.error);
        r.samples.push_back(x);
    }
    r.reference = f_weight(0.5 * s);
    r.reference_provenance = "sqrt(pi) Gamma((s-1)/2) / Gamma(s/2)";
    r.tolerance = s < 2.0 ? opt.tol.closing_edge : opt.tol.closing_deviation;
    fit_report(r, 1, true);
    set_deviation(r, 0.0);
    r.add_check("|limit - reference|", r.abs_deviation, r.tolerance);
    if (r.has_log_fit) r.add_check("|log-t coefficient|", std::abs(r.log_fit.log_coefficient), opt.tol.closing_log);
    add_log_check(r, opt.tol.log_sigma_smooth);
    r.finalize();
    return r;
}

LimitReport run_log_counterexample(double alpha, const SweepOptions& opt) {
    LimitReport r = new_report("log_counterexample", nullptr, 0.0);
    r.family_name = "one-sided progression t(k+alpha)";
    std::vector<double> grid = opt.t_grid.empty() ? std::vector<double>{0.2, 0.15, 0.1, 0.075, 0.05, 0.035, 0.025}
                                                  : opt.t_grid;
    for (double t : grid) {
        ArithmeticTail tail(t, alpha, static_cast<int>(std::ceil(opt.window / t)));
        SpectralInput in = make_input(tail.window_values(), tail, t);
        ContinuationResult h = continue_to_zero(in, tail, SpectralFunction::Eta);
        ContinuationResult c = continue_closed_form(in, tail, SpectralFunction::Eta, 0.0);
        r.samples.push_back({t, h.derivative, error_floor(h.derivative, std::abs(h.derivative - c.derivative) + h.error)});
    }
    double expected_log = -(1.0 - 2.0 * alpha);
    r.reference = expected_log;
    r.reference_provenance = "log t coefficient of the s-derivative: -(zeta_H(0,alpha) - zeta_H(0,1-alpha))";
    r.tolerance = opt.tol.log_sigma_rough;
    fit_report(r, 1, true);
    if (!r.has_log_fit) throw FitFailure("log counterexample: log fit unavailable");
    r.limit = r.log_fit.log_coefficient;
    r.limit_error = r.log_fit.log_std_error;
    set_deviation(r, 1.0);
    r.add_check("log-t coefficient / sigma", log_significance(r.log_fit), opt.tol.log_sigma_rough, false);
    r.notes.push_back("limit field holds the fitted log-t coefficient");
    r.finalize();
    return r;
}

}  // namespace adlim
