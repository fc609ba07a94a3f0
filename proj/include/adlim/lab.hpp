#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adlim/assemble.hpp"
#include "adlim/families.hpp"
#include "adlim/regularize.hpp"

namespace adlim {

// Verdict thresholds, one place. Scaled uniformly by --tolerance-scale.
struct ToleranceTable {
    double special_relative = 1e-8;
    double special_absolute = 1e-8;
    double hurwitz_absolute = 1e-9;
    double closing_deviation = 1e-4;
    double closing_log = 1e-6;
    double closing_edge = 1e-2;
    double mz_relative = 1e-3;
    double mz_linear = 1e-3;
    double eil_relative = 1e-3;
    double eil_t_eta = 1e-3;
    double pzl_zeta = 1e-2;
    double pzl_log_det = 5e-2;
    double holonomy_phase = 1e-3;
    double holonomy_exact = 1e-8;
    double holonomy_matrix = 5e-2;
    double flow_float = 1e-9;
    double log_sigma_smooth = 3.0;  // |log coefficient| / sigma at most this for smooth claims
    double log_sigma_rough = 5.0;   // and at least this for the counterexample
    double robustness = 1e-6;
    double invariant = 1e-10;
    double hermiticity = 1e-13;  // relative

    ToleranceTable scaled(double factor) const;
};

const ToleranceTable& default_tolerances();

struct SweepOptions {
    std::vector<double> t_grid;  // empty: the runner's default
    double window = 8.0;
    int theta_grid = 1024;
    std::optional<int> fixed_M;
    ToleranceTable tol = default_tolerances();
};

struct LimitSample {
    double t = 0.0;
    double value = 0.0;
    double error = 0.0;
};

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct LimitReport {
    std::string id;
    std::string family_name;
    std::string family_hash;
    cplx s = 0.0;
    std::vector<LimitSample> samples;
    int fit_order = -1;
    TaylorFit fit;
    bool has_log_fit = false;
    int log_fit_order = -1;
    TaylorFit log_fit;
    double limit = 0.0;
    double limit_error = 0.0;
    double limit_without_largest_t = 0.0;
    cplx reference = 0.0;
    std::string reference_provenance;
    double abs_deviation = 0.0;
    double rel_deviation = 0.0;
    double tolerance = 0.0;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    bool pass = false;

    void add_check(const std::string& name, double value, double threshold, bool pass_if_below = true);
    void finalize();  // pass = all checks pass
};

std::string to_json(const LimitReport& r);
std::string to_text(const LimitReport& r);
std::string to_csv(const LimitReport& r);  // t,value,error

// Polynomial fit of the lowest order consistent with the error bars (reduced chi^2 <= 2);
// falls back to the highest feasible order.
struct AdaptiveFit {
    TaylorFit fit;
    int order = -1;
    double reduced_chi2 = 0.0;
};
AdaptiveFit adaptive_taylor(const std::vector<LimitSample>& samples, bool with_log, int min_order = 1);

// delta_t data at one t: spectrum (cached per family, t, K, M) and two cutoff placements.
struct DeltaSample {
    double t = 0.0;
    Truncation truncation;
    std::shared_ptr<const TotalSpectrum> spectrum;
    std::unique_ptr<TailModel> tail, alt_tail;
    SpectralInput input, alt_input;
};
std::unique_ptr<DeltaSample> delta_sample(const Family& f, double t, double window = 8.0,
                                          std::optional<int> fixed_M = std::nullopt);
std::unique_ptr<TailModel> make_tail(const Family& f, double t, int K, const SmoothCutoff& cut);
void clear_spectrum_cache();

const std::vector<double>& default_t_grid();    // {0.2, 0.1, 0.05, 0.025}
const std::vector<double>& mz_t_grid();         // dense small-t grid for derivative claims

// lim t zeta bar(delta_t, s) against (1/sqrt pi) oint zeta bar(D, s - 1).
LimitReport run_theorem_mz(const Family& f, double s, const SweepOptions& opt = {});
// lim eta bar(delta_t, s) against (1/(i pi)) oint A(D, s); lim t eta bar(delta_t, s) = 0.
LimitReport run_theorem_eil(const Family& f, double s, const SweepOptions& opt = {});
// lim t zeta(delta_t, 0) and lim t log det(delta_t).
LimitReport run_corollary_pzl(const Family& f, const SweepOptions& opt = {});
// lim exp(-i pi eta bar(delta_t)) against (-1)^index hol(det D).
LimitReport run_holonomy(const Family& f, const SweepOptions& opt = {});
// index(P_t) = spectral flow = residue index, at t in the grid (default {0.5, 1}).
LimitReport run_spectral_flow(const FluxFamily& f, const SweepOptions& opt = {});
// lim t sum (t^2 k^2 + 1)^{-s/2} = sqrt(pi) Gamma((s-1)/2) / Gamma(s/2).
LimitReport run_closing_identity(double s, const SweepOptions& opt = {});
// t-derivative at s = 0 of eta bar for the one-sided spectrum {t (k + alpha)}: carries log t.
LimitReport run_log_counterexample(double alpha = 0.3, const SweepOptions& opt = {});

// The acceptance suite, one entry per criterion. Family files are read from family_dir.
struct SuiteOptions {
    std::string family_dir;
    int theta_grid = 1024;
    ToleranceTable tol = default_tolerances();
};

struct CriterionResult {
    int id = 0;
    std::string key;  // e.g. "closing-identity"
    bool pass = false;
    double seconds = 0.0;
    std::vector<LimitReport> reports;
    std::string summary;  // one line
};

const std::vector<std::string>& criterion_keys();  // index i is criterion i + 1
// Accepts "3" or "theorem-mz"; returns 0 when unknown.
int criterion_id(const std::string& key_or_number);
CriterionResult run_criterion(int id, const SuiteOptions& opt);
std::string default_family_dir();

// Direct value t sum_k (t^2 k^2 + 1)^{-s/2}, Euler-Maclaurin tail; error is the remainder bound.
LimitSample closing_sum(double t, double s, double window = 40.0);

}  // namespace adlim
