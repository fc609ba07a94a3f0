#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adlim/assemble.hpp"
#include "adlim/families.hpp"
#include "adlim/specfun.hpp"

namespace adlim {

// Smooth energy cutoff chi(x) = erfc(kappa (x - x_mid)) / 2 on |lambda|.
struct SmoothCutoff {
    double window = 8.0;  // effective energy window
    double kappa = 3.0;
    double x_mid = 6.0;

    static SmoothCutoff for_window(double window, double mid_fraction = 0.75);
    double chi(double x) const;
    double lo() const;  // below: chi == 1 to double precision
    double hi() const;  // above: chi == 0 to double precision
};

// Out-of-window part of a spectrum, in closed or semiclassical form. The computed
// eigenvalues enter with weight(|lambda|); the model supplies the complement.
class TailModel {
public:
    virtual ~TailModel() = default;
    virtual double weight(double abs_lambda) const = 0;
    virtual cplx power(cplx s) const = 0;          // sum |lambda|^-s
    virtual cplx signed_power(cplx s) const = 0;   // sum sign(lambda) |lambda|^-s
    virtual double heat(double u) const = 0;        // sum exp(-u lambda^2)
    virtual double signed_heat(double u) const = 0; // sum lambda exp(-u lambda^2)
    virtual double window() const = 0;              // energy scale of the split
    virtual std::string describe() const = 0;
};

// Finite spectrum: no tail. A window of 0 lets the heat-trace split pick its own scale.
class NoTail : public TailModel {
public:
    explicit NoTail(double window = 0.0) : window_(window) {}
    double weight(double) const override { return 1.0; }
    cplx power(cplx) const override { return 0.0; }
    cplx signed_power(cplx) const override { return 0.0; }
    double heat(double) const override { return 0.0; }
    double signed_heat(double) const override { return 0.0; }
    double window() const override { return window_; }
    std::string describe() const override { return "none"; }

private:
    double window_;
};

// Arithmetic progression {scale (k + alpha) : k in Z}; the caller supplies |k| <= k_max.
class ArithmeticTail : public TailModel {
public:
    ArithmeticTail(double scale, double alpha, int k_max);
    double weight(double) const override { return 1.0; }
    cplx power(cplx s) const override;
    cplx signed_power(cplx s) const override;
    double heat(double u) const override;
    double signed_heat(double u) const override;
    double window() const override { return scale_ * k_max_; }
    std::string describe() const override;

    // The computed part: scale (k + alpha), |k| <= k_max, zero entries included.
    std::vector<double> window_values() const;

private:
    double scale_, alpha_;
    int k_max_;
};

// Channels p^2 + v of a semiclassical symbol, integrated over p in R with weight 1 - chi(|lambda|).
// Quadrature data are built once per cutoff so that each s or u costs one pass over nodes.
class ChannelQuadrature {
public:
    ChannelQuadrature(const std::vector<double>& potentials, const SmoothCutoff& cut);
    cplx power(cplx s) const;   // sum over channels
    double heat(double u) const;
    std::size_t size() const { return channels_.size(); }

private:
    struct Channel {
        double v = 0.0;
        double p2 = 0.0;              // chi == 0 for |p| >= p2
        std::vector<double> log_e;    // log(p^2 + v) on transition nodes
        std::vector<double> e;        // p^2 + v on transition nodes
        std::vector<double> w;        // (1 - chi) dp, both signs of p
        std::vector<double> log_e0;   // log(p^2 + v) on [0, p2], used when v dominates
        std::vector<double> w0;
    };
    std::vector<Channel> channels_;

    static cplx beyond(const Channel& c, cplx s);  // integral over |p| >= p2, continued in s
};

// Semiclassical tail of delta_t for a flux family without winding. Per fiber mode k the
// squared blocks are t^2 m^2 + (k+a)^2 +- t a' (supersymmetric partners); the base modes
// are replaced by the integral over p = t m. Modes |k| > K are summed in closed form.
class FluxTail : public TailModel {
public:
    FluxTail(const FluxFamily& f, double t, int K, const SmoothCutoff& cut, int theta_points = 64);
    double weight(double x) const override { return cut_.chi(x); }
    cplx power(cplx s) const override;
    cplx signed_power(cplx) const override { return 0.0; }
    double heat(double u) const override;
    double signed_heat(double) const override { return 0.0; }
    double window() const override { return cut_.window; }
    std::string describe() const override;

private:
    double t_;
    int K_;
    SmoothCutoff cut_;
    std::vector<double> a_, ap_;  // a and a' on the theta grid
    std::unique_ptr<ChannelQuadrature> channels_;
    int k_exact_ = 64;  // modes past K summed without the large-k expansion
};

// Semiclassical tail of delta_t for a matrix loop: channels p^2 + mu with mu the
// eigenvalues of D^*D and D D^*.
class MatrixLoopTail : public TailModel {
public:
    MatrixLoopTail(const MatrixLoop& ml, double t, const SmoothCutoff& cut, int theta_points = 64);
    double weight(double x) const override { return cut_.chi(x); }
    cplx power(cplx s) const override;
    cplx signed_power(cplx) const override { return 0.0; }
    double heat(double u) const override;
    double signed_heat(double) const override { return 0.0; }
    double window() const override { return cut_.window; }
    std::string describe() const override;

private:
    double t_;
    SmoothCutoff cut_;
    int n_theta_ = 1;
    std::unique_ptr<ChannelQuadrature> channels_;
};

// Nonzero eigenvalues with window weights, plus the separated kernel.
struct SpectralInput {
    double t = 0.0;
    std::vector<double> eigenvalues;
    std::vector<double> weights;
    int kernel_dim = 0;
    double kernel_threshold = 0.0;
};

SpectralInput make_input(const std::vector<double>& eigenvalues, const TailModel& tail, double t = 0.0);
SpectralInput make_input(const TotalSpectrum& spec, const TailModel& tail);

struct Regularized {
    cplx value;
    double error = 0.0;
};

inline constexpr double kConvergentRegion = 2.5;

// Normalized zeta/eta in the convergent region; the error is the change under a second
// cutoff placement when `alternate` is given.
Regularized zeta_bar_direct(const SpectralInput& in, const TailModel& tail, cplx s,
                            const SpectralInput* alt_in = nullptr, const TailModel* alt_tail = nullptr);
Regularized eta_bar_direct(const SpectralInput& in, const TailModel& tail, cplx s,
                           const SpectralInput* alt_in = nullptr, const TailModel* alt_tail = nullptr);

// sum |lambda|^-s and sum sign(lambda) |lambda|^-s with the tail; meromorphic in s, kernel excluded.
cplx zeta_closed_form(const SpectralInput& in, const TailModel& tail, cplx s);
cplx eta_closed_form(const SpectralInput& in, const TailModel& tail, cplx s);

enum class SpectralFunction { Zeta, Eta };

// Heat-trace Mellin representation of zeta(s) = sum |lambda|^-s or of the normalized
// eta bar(s) = pi^{-1/2} Gamma((1+s)/2) sum sign(lambda) |lambda|^-s.
class HeatTraceModel {
public:
    HeatTraceModel(const SpectralInput& in, const TailModel& tail, SpectralFunction which);

    double theta(double u) const;  // (signed) heat trace without the kernel
    cplx evaluate(cplx s) const;   // continued function, kernel excluded
    double split() const { return u0_; }
    const std::vector<double>& asymptotic_coefficients() const { return coeff_; }
    double fit_residual() const { return fit_residual_; }

    static const std::vector<double>& exponents();  // -1, -1/2, 0, 1/2, 1

private:
    const SpectralInput& in_;
    const TailModel& tail_;
    SpectralFunction which_;
    double u0_ = 0.0;
    std::vector<double> coeff_;
    double fit_residual_ = 0.0;
    std::vector<double> small_nodes_, small_weights_, small_values_;  // log-u quadrature of Theta - fit
    std::vector<double> large_nodes_, large_weights_, large_values_;  // tail heat beyond u0
};

struct ContinuationResult {
    LaurentExpansion laurent;  // of zeta or eta bar without the kernel, at the target point
    double regularized = 0.0;  // constant coefficient plus kernel dimension
    double derivative = 0.0;   // coefficient of (s - z)
    double error = 0.0;
    double fit_residual = 0.0;
    std::string method;
};

inline constexpr double kFitTolerance = 1e-6;

// Heat-trace route (the engine behind continue_to_zero).
ContinuationResult continue_to(const SpectralInput& in, const TailModel& tail, SpectralFunction which, cplx z);
ContinuationResult continue_to_zero(const SpectralInput& in, const TailModel& tail, SpectralFunction which);
// Closed-form tail route, independent of the heat-trace fit.
ContinuationResult continue_closed_form(const SpectralInput& in, const TailModel& tail, SpectralFunction which,
                                        cplx z);

// exp(-zeta'(0)) from the heat-trace route; error from the derivative uncertainty.
Regularized det_zeta(const SpectralInput& in, const TailModel& tail);

struct TaylorFit {
    std::vector<double> coefficients;  // of 1, t, ..., t^J
    std::vector<double> std_errors;
    double log_coefficient = 0.0;  // of log t
    double log_std_error = 0.0;
    double t_log_coefficient = 0.0;  // of t log t
    double t_log_std_error = 0.0;
    double residual = 0.0;
    double condition = 0.0;
    bool with_log = false;
};

// Least squares on {1, t, ..., t^J} (and {log t, t log t}); errors are the larger of the
// residual-based and the declared (per-sample) uncertainty.
TaylorFit taylor_in_t(const std::vector<double>& t, const std::vector<double>& values, int J, bool with_log,
                      const std::vector<double>& errors = {});

struct MeromorphicSample {
    std::vector<cplx> s_points;
    std::vector<cplx> values;
    std::vector<double> errors;
    bool has_target = false;
    LaurentExpansion target;
    std::string method_tag;  // "direct+tail" or "heat-trace"
};

std::string to_json(const MeromorphicSample& m);

}  // namespace adlim
