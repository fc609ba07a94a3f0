#include "adlim/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

// sum_{|k| > K} exp(-v (k + alpha)^2)
double gauss_tail(double v, double alpha, int K) {
    if (v >= 0.3) {
        double sum = 0.0;
        for (int k = K + 1;; ++k) {
            double a = std::exp(-v * (k + alpha) * (k + alpha));
            double b = std::exp(-v * (k - alpha) * (k - alpha));
            sum += a + b;
            if (a + b <= 1e-20 * sum || a + b == 0.0) break;
        }
        return sum;
    }
    double total = 1.0;
    for (int n = 1; kPi * kPi * n * n / v < 60.0; ++n)
        total += 2.0 * std::exp(-kPi * kPi * n * n / v) * std::cos(kTwoPi * n * alpha);
    total *= std::sqrt(kPi / v);
    double window = 0.0;
    for (int k = -K; k <= K; ++k) window += std::exp(-v * (k + alpha) * (k + alpha));
    return total - window;
}

// sum_{|k| > K} (k + alpha) exp(-v (k + alpha)^2)
double signed_gauss_tail(double v, double alpha, int K) {
    if (v >= 0.3) {
        double sum = 0.0, first = 0.0;
        for (int k = K + 1;; ++k) {
            double a = (k + alpha) * std::exp(-v * (k + alpha) * (k + alpha));
            double b = (k - alpha) * std::exp(-v * (k - alpha) * (k - alpha));
            sum += a - b;
            if (k == K + 1) first = a + b;
            if (a + b <= 1e-20 * first || a + b == 0.0) break;
        }
        return sum;
    }
    double total = 0.0;
    for (int n = 1; kPi * kPi * n * n / v < 60.0; ++n)
        total += n * std::exp(-kPi * kPi * n * n / v) * std::sin(kTwoPi * n * alpha);
    total *= 2.0 * std::pow(kPi, 1.5) * std::pow(v, -1.5);
    double window = 0.0;
    for (int k = -K; k <= K; ++k) window += (k + alpha) * std::exp(-v * (k + alpha) * (k + alpha));
    return total - window;
}

double one_minus_chi(const SmoothCutoff& c, double x) { return 0.5 * std::erfc(-c.kappa * (x - c.x_mid)); }

cplx windowed_power(const SpectralInput& in, cplx s, bool signed_sum) {
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i < in.eigenvalues.size(); ++i) {
        double l = in.eigenvalues[i];
        cplx term = in.weights[i] * std::exp(-s * std::log(std::abs(l)));
        acc.add(signed_sum && l < 0.0 ? -term : term);
    }
    return acc.value();
}

cplx normalized_eta(cplx s, cplx signed_sum) { return gamma(0.5 * (1.0 + s)) * signed_sum / kSqrtPi; }

}  // namespace

SmoothCutoff SmoothCutoff::for_window(double window, double mid_fraction) {
    if (!(window > 0.0) || !(mid_fraction > 0.0 && mid_fraction < 1.0))
        throw DomainError("SmoothCutoff: bad window or placement");
    SmoothCutoff c;
    c.window = window;
    c.kappa = 24.0 / window;
    c.x_mid = mid_fraction * window;
    return c;
}

double SmoothCutoff::chi(double x) const { return 0.5 * std::erfc(kappa * (x - x_mid)); }
double SmoothCutoff::lo() const { return std::max(0.0, x_mid - 6.5 / kappa); }
double SmoothCutoff::hi() const { return x_mid + 6.5 / kappa; }

// ---------------------------------------------------------------- arithmetic

ArithmeticTail::ArithmeticTail(double scale, double alpha, int k_max) : scale_(scale), alpha_(alpha), k_max_(k_max) {
    if (!(scale > 0.0)) throw DomainError("ArithmeticTail: scale must be positive");
    if (!(std::abs(alpha) < 1.0)) throw DomainError("ArithmeticTail: |alpha| must be below 1");
    if (k_max < 1) throw DomainError("ArithmeticTail: k_max must be positive");
}

cplx ArithmeticTail::power(cplx s) const {
    return std::exp(-s * std::log(scale_)) *
           (hurwitz_zeta_shifted(s, k_max_ + 1 + alpha_) + hurwitz_zeta_shifted(s, k_max_ + 1 - alpha_));
}

cplx ArithmeticTail::signed_power(cplx s) const {
    return std::exp(-s * std::log(scale_)) *
           (hurwitz_zeta_shifted(s, k_max_ + 1 + alpha_) - hurwitz_zeta_shifted(s, k_max_ + 1 - alpha_));
}

double ArithmeticTail::heat(double u) const { return gauss_tail(u * scale_ * scale_, alpha_, k_max_); }

double ArithmeticTail::signed_heat(double u) const {
    return scale_ * signed_gauss_tail(u * scale_ * scale_, alpha_, k_max_);
}

std::string ArithmeticTail::describe() const {
    std::ostringstream os;
    os << "arithmetic progression " << scale_ << "*(k+" << alpha_ << "), |k|>" << k_max_ << " via Hurwitz zeta";
    return os.str();
}

std::vector<double> ArithmeticTail::window_values() const {
    std::vector<double> v;
    for (int k = -k_max_; k <= k_max_; ++k) v.push_back(scale_ * (k + alpha_));
    return v;
}

// ---------------------------------------------------------------- channels

ChannelQuadrature::ChannelQuadrature(const std::vector<double>& potentials, const SmoothCutoff& cut) {
    const double lo2 = cut.lo() * cut.lo();
    const double hi2 = cut.hi() * cut.hi();
    channels_.reserve(potentials.size());
    for (double v : potentials) {
        Channel c;
        c.v = v;
        double p_lo = std::sqrt(std::max(lo2 - v, 0.0));
        c.p2 = hi2 > v ? std::sqrt(hi2 - v) : 0.0;
        if (c.p2 == 0.0 && !(v > 0.0)) throw DomainError("ChannelQuadrature: non-positive channel beyond the window");
        if (c.p2 > p_lo) {
            QuadratureRule r = composite_gauss(p_lo, c.p2, 8, 16);
            for (std::size_t i = 0; i < r.nodes.size(); ++i) {
                double p = r.nodes[i];
                double e = p * p + v;
                double w = 2.0 * r.weights[i] * one_minus_chi(cut, std::sqrt(e));
                if (w == 0.0) continue;
                c.e.push_back(e);
                c.log_e.push_back(std::log(e));
                c.w.push_back(w);
            }
        }
        if (c.p2 > 0.0 && v > 0.5 * c.p2 * c.p2) {
            QuadratureRule r = composite_gauss(0.0, c.p2, 4, 20);
            for (std::size_t i = 0; i < r.nodes.size(); ++i) {
                c.log_e0.push_back(std::log(r.nodes[i] * r.nodes[i] + v));
                c.w0.push_back(2.0 * r.weights[i]);
            }
        }
        channels_.push_back(std::move(c));
    }
}

cplx ChannelQuadrature::beyond(const Channel& c, cplx s) {
    if (c.p2 == 0.0 || !c.w0.empty()) {
        cplx full = f_weight(0.5 * s) * std::exp(0.5 * (1.0 - s) * std::log(c.v));
        if (c.p2 == 0.0) return full;
        cplx inner = 0.0;
        for (std::size_t i = 0; i < c.w0.size(); ++i) inner += c.w0[i] * std::exp(-0.5 * s * c.log_e0[i]);
        return full - inner;
    }
    // 2 sum_n binom(-s/2, n) v^n p2^{1-s-2n} / (s + 2n - 1); converges for |v| < p2^2.
    const double ratio = c.v / (c.p2 * c.p2);
    const cplx lead = std::exp((1.0 - s) * std::log(c.p2));
    cplx b = 1.0, sum = 0.0;
    double rn = 1.0;
    for (int n = 0; n < 4000; ++n) {
        cplx term = b * rn / (s + 2.0 * n - 1.0);
        sum += term;
        if (n > 2 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
        b *= (-0.5 * s - static_cast<double>(n)) / static_cast<double>(n + 1);
        rn *= ratio;
    }
    return 2.0 * lead * sum;
}

cplx ChannelQuadrature::power(cplx s) const {
    CompensatedSum<cplx> acc;
    const cplx hs = -0.5 * s;
    for (const Channel& c : channels_) {
        cplx part = 0.0;
        for (std::size_t i = 0; i < c.w.size(); ++i) part += c.w[i] * std::exp(hs * c.log_e[i]);
        acc.add(part + beyond(c, s));
    }
    return acc.value();
}

double ChannelQuadrature::heat(double u) const {
    if (!(u > 0.0)) throw DomainError("ChannelQuadrature::heat: u must be positive");
    CompensatedSum<double> acc;
    const double gauss = std::sqrt(kPi / u);
    for (const Channel& c : channels_) {
        double part = 0.0;
        for (std::size_t i = 0; i < c.w.size(); ++i) part += c.w[i] * std::exp(-u * c.e[i]);
        double tail = c.p2 == 0.0 ? 1.0 : std::erfc(std::sqrt(u) * c.p2);
        if (tail > 0.0) part += std::exp(-u * c.v) * gauss * tail;
        acc.add(part);
    }
    return acc.value();
}

// ---------------------------------------------------------------- flux

FluxTail::FluxTail(const FluxFamily& f, double t, int K, const SmoothCutoff& cut, int theta_points)
    : t_(t), K_(K), cut_(cut) {
    if (f.winding != 0) throw DomainError("FluxTail: winding families have no fiber-mode decoupling");
    if (!(t > 0.0)) throw DomainError("FluxTail: t must be positive");
    const double amax = f.max_abs_a();
    if (K + 1 - amax < cut.hi() + 1.0)
        throw TruncationTooSmall("FluxTail: fiber modes beyond K reach into the cutoff window");
    const int n = f.max_abs_a_prime() == 0.0 ? 1 : std::max(8, theta_points);
    std::vector<double> pots;
    for (double th : uniform_theta_grid(n)) {
        a_.push_back(f.a(th));
        ap_.push_back(f.a_prime(th));
        for (int k = -K; k <= K; ++k) {
            double q = k + a_.back();
            pots.push_back(q * q + t * ap_.back());
            pots.push_back(q * q - t * ap_.back());
        }
    }
    channels_ = std::make_unique<ChannelQuadrature>(pots, cut);
}

cplx FluxTail::power(cplx s) const {
    const double n = static_cast<double>(a_.size());
    const cplx beta = 0.5 * (1.0 - s);
    const cplx c2 = 0.5 * beta * (beta - 1.0);
    const cplx fw = f_weight(0.5 * s);
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i < a_.size(); ++i) {
        const double a = a_[i], x0 = t_ * ap_[i];
        cplx part = 2.0 * (hurwitz_zeta_shifted(s - 1.0, K_ + 1 + a) + hurwitz_zeta_shifted(s - 1.0, K_ + 1 - a));
        if (x0 != 0.0) {
            // exact channel pair minus its leading term for the first modes, expansion beyond
            for (int j = K_ + 1; j <= K_ + k_exact_; ++j)
                for (double q : {j + a, j - a}) {
                    double x = x0 / (q * q);
                    cplx pair = std::exp(beta * std::log1p(x)) + std::exp(beta * std::log1p(-x)) - 2.0;
                    part += std::exp(2.0 * beta * std::log(q)) * pair;
                }
            double z = K_ + k_exact_ + 1;
            part += 2.0 * c2 * x0 * x0 * (hurwitz_zeta_shifted(s + 3.0, z + a) + hurwitz_zeta_shifted(s + 3.0, z - a));
        }
        acc.add(fw * part);
    }
    return (channels_->power(s) + acc.value()) / (t_ * n);
}

double FluxTail::heat(double u) const {
    const double n = static_cast<double>(a_.size());
    CompensatedSum<double> acc;
    for (std::size_t i = 0; i < a_.size(); ++i)
        acc.add(std::sqrt(kPi / u) * gauss_tail(u, a_[i], K_) * 2.0 * std::cosh(u * t_ * ap_[i]));
    return (channels_->heat(u) + acc.value()) / (t_ * n);
}

std::string FluxTail::describe() const {
    std::ostringstream os;
    os << "flux semiclassical tail: " << channels_->size() << " channels over " << a_.size()
       << " theta points, erfc cutoff at " << cut_.x_mid << " (kappa " << cut_.kappa << "), modes |k|>" << K_
       << " via shifted Hurwitz zeta";
    return os.str();
}

// ---------------------------------------------------------------- matrix loop

MatrixLoopTail::MatrixLoopTail(const MatrixLoop& ml, double t, const SmoothCutoff& cut, int theta_points)
    : t_(t), cut_(cut) {
    if (!(t > 0.0)) throw DomainError("MatrixLoopTail: t must be positive");
    n_theta_ = ml.support() == 0 ? 1 : std::max(8, theta_points);
    std::vector<double> pots;
    for (double th : uniform_theta_grid(n_theta_)) {
        CMatrix d = ml.at(th);
        for (const CMatrix& h : {d.adjoint() * d, d * d.adjoint()})
            for (double mu : hermitian_eigenvalues(h)) pots.push_back(std::max(mu, 0.0));
    }
    channels_ = std::make_unique<ChannelQuadrature>(pots, cut);
}

cplx MatrixLoopTail::power(cplx s) const { return channels_->power(s) / (t_ * n_theta_); }
double MatrixLoopTail::heat(double u) const { return channels_->heat(u) / (t_ * n_theta_); }

std::string MatrixLoopTail::describe() const {
    std::ostringstream os;
    os << "matrix-loop semiclassical tail: " << channels_->size() << " channels over " << n_theta_
       << " theta points, erfc cutoff at " << cut_.x_mid;
    return os.str();
}

// ---------------------------------------------------------------- direct values

SpectralInput make_input(const std::vector<double>& eigenvalues, const TailModel& tail, double t) {
    SpectralInput in;
    in.t = t;
    double mx = 0.0;
    for (double l : eigenvalues) mx = std::max(mx, std::abs(l));
    in.kernel_threshold = default_kernel_threshold(mx);
    for (double l : eigenvalues) {
        if (!std::isfinite(l)) throw DomainError("make_input: non-finite eigenvalue");
        if (std::abs(l) < in.kernel_threshold) {
            ++in.kernel_dim;
            continue;
        }
        double w = tail.weight(std::abs(l));
        if (w <= 0.0) continue;
        in.eigenvalues.push_back(l);
        in.weights.push_back(w);
    }
    return in;
}

SpectralInput make_input(const TotalSpectrum& spec, const TailModel& tail) {
    return make_input(spec.eigenvalues, tail, spec.t);
}

cplx zeta_closed_form(const SpectralInput& in, const TailModel& tail, cplx s) {
    return windowed_power(in, s, false) + tail.power(s);
}

cplx eta_closed_form(const SpectralInput& in, const TailModel& tail, cplx s) {
    return windowed_power(in, s, true) + tail.signed_power(s);
}

Regularized zeta_bar_direct(const SpectralInput& in, const TailModel& tail, cplx s, const SpectralInput* alt_in,
                            const TailModel* alt_tail) {
    checked_scalar(s, "zeta_bar_direct");
    if (s.real() < kConvergentRegion) throw RegionError("zeta_bar_direct: Re s below the convergent region");
    auto eval = [&](const SpectralInput& i, const TailModel& tl) {
        return gamma(0.5 * s) * zeta_closed_form(i, tl, s) + static_cast<double>(i.kernel_dim);
    };
    Regularized r;
    r.value = eval(in, tail);
    if (alt_in && alt_tail) r.error = std::abs(r.value - eval(*alt_in, *alt_tail));
    return r;
}

Regularized eta_bar_direct(const SpectralInput& in, const TailModel& tail, cplx s, const SpectralInput* alt_in,
                           const TailModel* alt_tail) {
    checked_scalar(s, "eta_bar_direct");
    if (s.real() < kConvergentRegion) throw RegionError("eta_bar_direct: Re s below the convergent region");
    auto eval = [&](const SpectralInput& i, const TailModel& tl) {
        return normalized_eta(s, eta_closed_form(i, tl, s)) + static_cast<double>(i.kernel_dim);
    };
    Regularized r;
    r.value = eval(in, tail);
    if (alt_in && alt_tail) r.error = std::abs(r.value - eval(*alt_in, *alt_tail));
    return r;
}

// ---------------------------------------------------------------- heat trace

const std::vector<double>& HeatTraceModel::exponents() {
    static const std::vector<double> e{-1.0, -0.5, 0.0, 0.5, 1.0};
    return e;
}

HeatTraceModel::HeatTraceModel(const SpectralInput& in, const TailModel& tail, SpectralFunction which)
    : in_(in), tail_(tail), which_(which) {
    double window = tail.window();
    if (!(window > 0.0)) {
        double mx = 0.0;
        for (double l : in.eigenvalues) mx = std::max(mx, std::abs(l));
        window = mx > 0.0 ? 100.0 * mx : 1.0;
    }
    u0_ = 1.0 / (window * window);

    auto unsigned_theta = [&](double u) {
        CompensatedSum<double> acc;
        for (std::size_t i = 0; i < in.eigenvalues.size(); ++i)
            acc.add(in.weights[i] * std::exp(-u * in.eigenvalues[i] * in.eigenvalues[i]));
        return acc.value() + tail.heat(u);
    };

    const auto& ex = exponents();
    const int n_fit = 48;
    const double lo = std::log(1e-6 * u0_), hi = std::log(0.1 * u0_);
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs, weights, scales;
    for (int i = 0; i < n_fit; ++i) {
        double u = std::exp(lo + (hi - lo) * i / (n_fit - 1));
        double sc = std::max(unsigned_theta(u), 1e-300);
        std::vector<double> row;
        for (double e : ex) row.push_back(std::pow(u, e));
        rows.push_back(row);
        rhs.push_back(theta(u));
        weights.push_back(1.0 / sc);
        scales.push_back(sc);
    }
    LeastSquaresFit fit = least_squares(rows, rhs, weights);
    coeff_ = fit.coefficients;
    auto fitted = [&](double u) {
        double v = 0.0;
        for (std::size_t j = 0; j < ex.size(); ++j) v += coeff_[j] * std::pow(u, ex[j]);
        return v;
    };
    for (int i = 0; i < n_fit; ++i)
        fit_residual_ = std::max(fit_residual_, std::abs(rhs[i] - fitted(std::exp(lo + (hi - lo) * i / (n_fit - 1)))) /
                                                    scales[i]);
    if (fit_residual_ > kFitTolerance) {
        std::ostringstream os;
        os << "HeatTraceModel: small-u fit residual " << fit_residual_ << " exceeds " << kFitTolerance;
        throw FitFailure(os.str());
    }

    // Theta - fit on [1e-6 u0, u0] in log u; below that it is neglected.
    QuadratureRule small = composite_gauss(lo, std::log(u0_), 14, 16);
    for (std::size_t i = 0; i < small.nodes.size(); ++i) {
        double u = std::exp(small.nodes[i]);
        small_nodes_.push_back(small.nodes[i]);
        small_weights_.push_back(small.weights[i]);
        small_values_.push_back(theta(u) - fitted(u));
    }

    // Tail heat beyond u0; the computed eigenvalues are integrated in closed form.
    auto tail_theta = [&](double u) { return which_ == SpectralFunction::Zeta ? tail.heat(u) : tail.signed_heat(u); };
    double ref = std::max(std::abs(tail.heat(u0_)), 1e-300);
    if (tail.heat(u0_) != 0.0) {
        double umax = u0_;
        while (std::abs(tail.heat(umax)) > 1e-18 * ref && umax < 1e6 * u0_) umax *= 2.0;
        int panels = std::max(4, 2 * static_cast<int>(std::ceil(std::log2(umax / u0_))));
        QuadratureRule large = composite_gauss(std::log(u0_), std::log(umax), panels, 16);
        for (std::size_t i = 0; i < large.nodes.size(); ++i) {
            large_nodes_.push_back(large.nodes[i]);
            large_weights_.push_back(large.weights[i]);
            large_values_.push_back(tail_theta(std::exp(large.nodes[i])));
        }
    }
}

double HeatTraceModel::theta(double u) const {
    CompensatedSum<double> acc;
    const bool zeta = which_ == SpectralFunction::Zeta;
    for (std::size_t i = 0; i < in_.eigenvalues.size(); ++i) {
        double l = in_.eigenvalues[i];
        double e = in_.weights[i] * std::exp(-u * l * l);
        acc.add(zeta ? e : l * e);
    }
    return acc.value() + (zeta ? tail_.heat(u) : tail_.signed_heat(u));
}

cplx HeatTraceModel::evaluate(cplx s) const {
    checked_scalar(s, "HeatTraceModel::evaluate");
    const bool zeta = which_ == SpectralFunction::Zeta;
    const cplx sigma = zeta ? 0.5 * s : 0.5 * (s + 1.0);
    const auto& ex = exponents();

    cplx bracket = 0.0;
    for (std::size_t i = 0; i < small_nodes_.size(); ++i)
        bracket += small_weights_[i] * std::exp(sigma * small_nodes_[i]) * small_values_[i];
    for (std::size_t i = 0; i < large_nodes_.size(); ++i)
        bracket += large_weights_[i] * std::exp(sigma * large_nodes_[i]) * large_values_[i];
    const double lu0 = std::log(u0_);
    for (std::size_t j = 0; j < ex.size(); ++j) {
        cplx p = sigma + ex[j];
        if (std::abs(p) < kPoleThreshold)
            throw PoleError("HeatTraceModel: evaluation on a pole of the asymptotic term", s.real(), 1);
        bracket += coeff_[j] * std::exp(p * lu0) / p;
    }

    std::vector<double> x(in_.eigenvalues.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = u0_ * in_.eigenvalues[i] * in_.eigenvalues[i];
    std::vector<cplx> q = x.empty() ? std::vector<cplx>{} : gamma_q_many(sigma, x);
    CompensatedSum<cplx> disc;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double l = in_.eigenvalues[i];
        cplx term = in_.weights[i] * q[i] * std::exp(-s * std::log(std::abs(l)));
        disc.add(!zeta && l < 0.0 ? -term : term);
    }
    if (zeta) return rgamma(sigma) * bracket + disc.value();
    return (bracket + gamma(sigma) * disc.value()) / kSqrtPi;
}

// ---------------------------------------------------------------- continuation

namespace {

ContinuationResult finish(const LaurentExpansion& l, const SpectralInput& in, cplx z, double fit_residual,
                          const std::string& method) {
    ContinuationResult r;
    r.laurent = l;
    r.regularized = l.coeff(0).real();
    if (std::abs(z) == 0.0) r.regularized += in.kernel_dim;
    r.derivative = l.coeff(1).real();
    r.fit_residual = fit_residual;
    r.error = l.tolerance + fit_residual * std::abs(l.coeff(0));
    r.method = method;
    return r;
}

}  // namespace

ContinuationResult continue_to(const SpectralInput& in, const TailModel& tail, SpectralFunction which, cplx z) {
    HeatTraceModel model(in, tail, which);
    LaurentExpansion l = laurent_coefficients([&](cplx s) { return model.evaluate(s); }, z, -1, 2, 0.1, 64);
    return finish(l, in, z, model.fit_residual(), "heat-trace");
}

ContinuationResult continue_to_zero(const SpectralInput& in, const TailModel& tail, SpectralFunction which) {
    return continue_to(in, tail, which, 0.0);
}

ContinuationResult continue_closed_form(const SpectralInput& in, const TailModel& tail, SpectralFunction which,
                                        cplx z) {
    ScalarFn fn;
    if (which == SpectralFunction::Zeta)
        fn = [&](cplx s) { return zeta_closed_form(in, tail, s); };
    else
        fn = [&](cplx s) { return normalized_eta(s, eta_closed_form(in, tail, s)); };
    LaurentExpansion l = laurent_coefficients(fn, z, -1, 2, 0.1, 64);
    return finish(l, in, z, 0.0, "direct+tail");
}

Regularized det_zeta(const SpectralInput& in, const TailModel& tail) {
    ContinuationResult c = continue_to_zero(in, tail, SpectralFunction::Zeta);
    Regularized r;
    r.value = std::exp(-c.derivative);
    r.error = std::abs(r.value) * c.laurent.tolerance;
    return r;
}

// ---------------------------------------------------------------- t fits

TaylorFit taylor_in_t(const std::vector<double>& t, const std::vector<double>& values, int J, bool with_log,
                      const std::vector<double>& errors) {
    if (t.size() != values.size() || (!errors.empty() && errors.size() != t.size()))
        throw DomainError("taylor_in_t: inconsistent sample sizes");
    if (J < 0) throw DomainError("taylor_in_t: negative order");
    std::set<double> distinct(t.begin(), t.end());
    if (static_cast<int>(distinct.size()) < J + 3)
        throw DomainError("taylor_in_t: need at least J + 3 distinct t values");
    for (double ti : t)
        if (!(ti > 0.0)) throw DomainError("taylor_in_t: t must be positive");

    const int p = J + 1 + (with_log ? 2 : 0);
    if (static_cast<int>(t.size()) < p) throw DomainError("taylor_in_t: fewer samples than coefficients");
    std::vector<std::vector<double>> rows;
    std::vector<double> w;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, std::abs(v));
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::vector<double> row;
        for (int j = 0; j <= J; ++j) row.push_back(std::pow(t[i], j));
        if (with_log) {
            row.push_back(std::log(t[i]));
            row.push_back(t[i] * std::log(t[i]));
        }
        rows.push_back(row);
        w.push_back(errors.empty() ? 1.0 : 1.0 / std::max(errors[i], 1e-15 * std::max(vmax, 1.0)));
    }
    LeastSquaresFit fit = least_squares(rows, values, w);
    if (fit.condition > 1e12) {
        std::ostringstream os;
        os << "taylor_in_t: design condition " << fit.condition << " above 1e12";
        throw IllConditioned(os.str());
    }
    const int dof = static_cast<int>(t.size()) - p;
    double res_scale = dof > 0 ? fit.residual_norm / std::sqrt(static_cast<double>(dof)) : 0.0;
    double factor = errors.empty() ? res_scale : std::max(1.0, res_scale);

    TaylorFit out;
    out.with_log = with_log;
    out.condition = fit.condition;
    for (int j = 0; j <= J; ++j) {
        out.coefficients.push_back(fit.coefficients[j]);
        out.std_errors.push_back(fit.unit_std_errors[j] * factor);
    }
    if (with_log) {
        out.log_coefficient = fit.coefficients[J + 1];
        out.log_std_error = fit.unit_std_errors[J + 1] * factor;
        out.t_log_coefficient = fit.coefficients[J + 2];
        out.t_log_std_error = fit.unit_std_errors[J + 2] * factor;
    }
    double r2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double pred = 0.0;
        for (int j = 0; j < p; ++j) pred += rows[i][j] * fit.coefficients[j];
        r2 += (values[i] - pred) * (values[i] - pred);
    }
    out.residual = std::sqrt(r2);
    return out;
}

std::string to_json(const MeromorphicSample& m) {
    using nlohmann::json;
    auto c = [](cplx z) { return json::array({z.real(), z.imag()}); };
    json j;
    j["method_tag"] = m.method_tag;
    j["s_points"] = json::array();
    j["values"] = json::array();
    for (cplx s : m.s_points) j["s_points"].push_back(c(s));
    for (cplx v : m.values) j["values"].push_back(c(v));
    j["errors"] = m.errors;
    if (m.has_target) {
        json t;
        t["center"] = c(m.target.center);
        t["radius"] = m.target.radius_used;
        t["tolerance"] = m.target.tolerance;
        json co = json::object();
        for (auto& [k, v] : m.target.coefficients) co[std::to_string(k)] = c(v);
        t["coefficients"] = co;
        j["target"] = t;
    } else {
        j["target"] = nullptr;
    }
    return j.dump(2);
}

}  // namespace adlim
