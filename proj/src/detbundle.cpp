#include "adlim/detbundle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "adlim/errors.hpp"
#include "adlim/specfun.hpp"

namespace adlim {

namespace {

void check_grid(int grid) {
    if (grid < 4 || (grid & (grid - 1)) != 0) throw DomainError("detbundle: grid size must be a power of two");
}

// Tr((D^*D)^{-s/2} D^{-1} D') for a square invertible matrix, via D = U S V^*.
cplx matrix_trace(const CMatrix& d, const CMatrix& dp, cplx s, double theta) {
    if (d.rows != d.cols) throw NotInvertible("bf_form: non-square fiber operator needs stabilization", theta);
    SVD sv = svd(d);
    if (sv.sigma.front() <= 10.0 * default_kernel_threshold(sv.sigma.back()))
        throw NotInvertible("bf_form: fiber operator not invertible", theta);
    CMatrix m = sv.u.adjoint() * dp * sv.v;
    CompensatedSum<cplx> acc;
    for (int i = 0; i < d.rows; ++i) acc.add(std::exp(-(s + 1.0) * std::log(sv.sigma[i])) * m(i, i));
    return acc.value();
}

// Flux modes outside [k_min, k_max]: a' sum sign(k+a) |k+a|^{-1-s}.
cplx flux_high_modes(double a, double ap, int k_min, int k_max, cplx s) {
    return ap * (hurwitz_zeta_shifted(1.0 + s, k_max + 1 + a) - hurwitz_zeta_shifted(1.0 + s, 1 - k_min - a));
}

// Constant Laurent coefficient of flux_high_modes at s = 0; the poles cancel.
double flux_high_modes_at_zero(double a, double ap, int k_min, int k_max) {
    return ap * (digamma(1.0 - k_min - a).real() - digamma(k_max + 1.0 + a).real());
}

const FluxFamily* stabilized_flux(const StabilizedFamily& sf) { return std::get_if<FluxFamily>(&sf.base); }

}  // namespace

cplx bf_value(const Family& f, double theta, cplx s) {
    checked_scalar(s, "bf_value");
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        bool ker = false;
        double fr = flux_fraction(fl->total(theta), &ker);
        if (ker) throw NotInvertible("bf_form: flux family has a kernel", theta);
        return gamma(1.0 + 0.5 * s) * fl->total_prime(theta) * (hurwitz_zeta(1.0 + s, fr) - hurwitz_zeta(1.0 + s, 1.0 - fr));
    }
    const auto& ml = std::get<MatrixLoop>(f);
    return gamma(1.0 + 0.5 * s) * matrix_trace(ml.at(theta), ml.derivative(theta), s, theta);
}

cplx bf_value_at_zero(const Family& f, double theta) {
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        bool ker = false;
        double fr = flux_fraction(fl->total(theta), &ker);
        if (ker) throw NotInvertible("bf_form: flux family has a kernel", theta);
        return fl->total_prime(theta) * kPi / std::tan(kPi * fr);
    }
    const auto& ml = std::get<MatrixLoop>(f);
    return matrix_trace(ml.at(theta), ml.derivative(theta), 0.0, theta);
}

cplx bf_value(const StabilizedFamily& sf, double theta, cplx s) {
    checked_scalar(s, "bf_value");
    if (sf.empty()) return bf_value(sf.base, theta, s);
    cplx v = matrix_trace(sf.d_u(theta), sf.d_u_prime(theta), s, theta);
    if (auto* fl = stabilized_flux(sf))
        v += flux_high_modes(fl->a(theta), fl->a_prime(theta), sf.window_k_min, sf.window_k_max, s);
    return gamma(1.0 + 0.5 * s) * v;
}

cplx bf_value_at_zero(const StabilizedFamily& sf, double theta) {
    if (sf.empty()) return bf_value_at_zero(sf.base, theta);
    cplx v = matrix_trace(sf.d_u(theta), sf.d_u_prime(theta), 0.0, theta);
    if (auto* fl = stabilized_flux(sf))
        v += flux_high_modes_at_zero(fl->a(theta), fl->a_prime(theta), sf.window_k_min, sf.window_k_max);
    return v;
}

cplx bf_window_direct(const StabilizedFamily& sf, double theta, cplx s) {
    if (!stabilized_flux(sf)) throw DomainError("bf_window_direct: flux family expected");
    CMatrix l = sf.window(theta);
    CMatrix lp(l.rows, l.cols);
    double ap = stabilized_flux(sf)->a_prime(theta);
    for (int i = 0; i < l.rows; ++i) lp(i, i) = ap;
    return gamma(1.0 + 0.5 * s) * matrix_trace(l, lp, s, theta);
}

cplx bf_window_closed(const StabilizedFamily& sf, double theta, cplx s) {
    const FluxFamily* fl = stabilized_flux(sf);
    if (!fl) throw DomainError("bf_window_closed: flux family expected");
    bool ker = false;
    double a = fl->a(theta);
    double fr = flux_fraction(a, &ker);
    if (ker) throw NotInvertible("bf_window_closed: window has a kernel", theta);
    // full sum minus the modes outside the window
    cplx full = fl->a_prime(theta) * (hurwitz_zeta(1.0 + s, fr) - hurwitz_zeta(1.0 + s, 1.0 - fr));
    return gamma(1.0 + 0.5 * s) * (full - flux_high_modes(a, fl->a_prime(theta), sf.window_k_min, sf.window_k_max, s));
}

namespace {

template <class Value, class ValueZero>
ConnectionFormSample sample_form(const std::vector<cplx>& s, int grid, Value value, ValueZero value_zero) {
    check_grid(grid);
    ConnectionFormSample out;
    out.theta = uniform_theta_grid(grid);
    out.s_values = s;
    out.values.assign(s.size(), std::vector<cplx>(grid));
    out.regularized_at_zero.resize(grid);
    parallel_for(static_cast<std::size_t>(grid), [&](std::size_t i) {
        for (std::size_t j = 0; j < s.size(); ++j) out.values[j][i] = value(out.theta[i], s[j]);
        out.regularized_at_zero[i] = value_zero(out.theta[i]);
    });
    for (auto& row : out.values)
        for (cplx v : row)
            if (!is_finite(v)) throw NonConvergence("bf_form: non-finite value");
    return out;
}

}  // namespace

ConnectionFormSample bf_form(const Family& f, const std::vector<cplx>& s, int grid) {
    return sample_form(
        s, grid, [&](double th, cplx z) { return bf_value(f, th, z); }, [&](double th) { return bf_value_at_zero(f, th); });
}

ConnectionFormSample bf_form(const StabilizedFamily& sf, const std::vector<cplx>& s, int grid) {
    return sample_form(
        s, grid, [&](double th, cplx z) { return bf_value(sf, th, z); },
        [&](double th) { return bf_value_at_zero(sf, th); });
}

std::string connection_form_csv(const ConnectionFormSample& c) {
    std::ostringstream os;
    os.precision(17);
    os << "s_re,s_im,theta,re_A,im_A\n";
    for (std::size_t j = 0; j < c.s_values.size(); ++j)
        for (std::size_t i = 0; i < c.theta.size(); ++i)
            os << c.s_values[j].real() << ',' << c.s_values[j].imag() << ',' << c.theta[i] << ','
               << c.values[j][i].real() << ',' << c.values[j][i].imag() << '\n';
    return os.str();
}

cplx holonomy(const Family& f, int grid) {
    check_grid(grid);
    std::vector<cplx> v(grid);
    parallel_for(static_cast<std::size_t>(grid), [&](std::size_t i) { v[i] = bf_value_at_zero(f, kTwoPi * i / grid); });
    CompensatedSum<cplx> acc;
    for (cplx x : v) acc.add(x);
    return std::exp(-acc.value() * (kTwoPi / grid));
}

cplx holonomy(const StabilizedFamily& sf, int grid) {
    if (sf.empty()) return holonomy(sf.base, grid);
    check_grid(grid);
    std::vector<double> cuts = sf.breakpoints;
    if (cuts.empty()) cuts.push_back(0.0);
    std::vector<std::pair<double, double>> pieces;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        double a = cuts[i];
        double b = i + 1 < cuts.size() ? cuts[i + 1] : cuts[0] + kTwoPi;
        if (b > a) pieces.emplace_back(a, b);
    }
    const int order = 20;
    std::vector<double> nodes, weights;
    for (auto [a, b] : pieces) {
        int panels = std::max(1, static_cast<int>(std::ceil(grid * (b - a) / kTwoPi / order)));
        QuadratureRule r = composite_gauss(a, b, panels, order);
        nodes.insert(nodes.end(), r.nodes.begin(), r.nodes.end());
        weights.insert(weights.end(), r.weights.begin(), r.weights.end());
    }
    std::vector<cplx> v(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) { v[i] = weights[i] * bf_value_at_zero(sf, nodes[i]); });
    CompensatedSum<cplx> acc;
    for (cplx x : v) acc.add(x);
    return std::exp(-acc.value());
}

// ---------------------------------------------------------------- spectral flow

SpectralFlowRecord spectral_flow(const FluxFamily& f, int grid) {
    if (grid < 8) throw DomainError("spectral_flow: grid too small");
    // samples j = -1 .. grid + 1, periodic up to the winding so that a zero on theta = 0
    // is seen identically at both ends
    std::vector<double> th(grid + 3), tot(grid + 3);
    for (int j = 0; j < grid; ++j) tot[j + 1] = f.total(kTwoPi * j / grid);
    tot[0] = tot[grid] - f.winding;
    tot[grid + 1] = tot[1] + f.winding;
    tot[grid + 2] = tot[2] + f.winding;
    for (int j = -1; j <= grid + 1; ++j) th[j + 1] = kTwoPi * j / grid;
    double lo = *std::min_element(tot.begin(), tot.end());
    double hi = *std::max_element(tot.begin(), tot.end());
    SpectralFlowRecord rec;
    for (int k = static_cast<int>(std::floor(-hi)) - 1; k <= static_cast<int>(std::ceil(-lo)) + 1; ++k) {
        auto g = [&](double x) { return k + f.total(x); };
        std::vector<double> gv(grid + 3);
        for (int j = 0; j < grid + 3; ++j) gv[j] = k + tot[j];
        // sign per sample; zero counts as positive so that the total telescopes to c
        std::vector<int> sg(grid + 3);
        for (int j = 0; j < grid + 3; ++j) sg[j] = gv[j] >= 0.0 ? 1 : -1;
        for (int j = 1; j <= grid + 1; ++j) {
            if (std::abs(gv[j]) >= kCrossingTolerance) continue;
            int left = sg[j - 1], right = gv[j + 1] >= 0.0 ? 1 : -1;
            if (left == right) {
                if (j <= grid) rec.tangential.push_back({th[j], 0, k});
                sg[j] = left;
            }
        }
        for (int j = 1; j <= grid; ++j) {
            if (sg[j] == sg[j + 1]) continue;
            // bisection on the sample interval, widened when the zero sits on a sample
            double a = std::abs(gv[j]) < kCrossingTolerance ? th[j - 1] : th[j];
            double b = std::abs(gv[j + 1]) < kCrossingTolerance ? th[j + 2] : th[j + 1];
            double ga = g(a);
            for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
                double m = 0.5 * (a + b);
                double gm = g(m);
                if ((gm >= 0.0) == (ga >= 0.0)) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            double at = std::fmod(0.5 * (a + b) + kTwoPi, kTwoPi);
            if (at > kTwoPi - 1e-12) at = 0.0;
            rec.crossings.push_back({at, sg[j + 1] > sg[j] ? 1 : -1, k});
        }
    }
    std::sort(rec.crossings.begin(), rec.crossings.end(),
              [](const Crossing& x, const Crossing& y) { return x.theta < y.theta || (x.theta == y.theta && x.mode < y.mode); });
    for (const Crossing& c : rec.crossings) rec.total += c.direction;
    return rec;
}

std::string to_json(const SpectralFlowRecord& r) {
    using nlohmann::json;
    json j;
    auto list = [](const std::vector<Crossing>& v) {
        json a = json::array();
        for (const Crossing& c : v) a.push_back({{"theta", c.theta}, {"direction", c.direction}, {"mode", c.mode}});
        return a;
    };
    j["crossings"] = list(r.crossings);
    j["tangential"] = list(r.tangential);
    j["total"] = r.total;
    return j.dump(2);
}

std::vector<double> var_eta_form(const FluxFamily& f, int grid) {
    check_grid(grid);
    std::vector<double> out(grid);
    parallel_for(static_cast<std::size_t>(grid), [&](std::size_t i) {
        double th = kTwoPi * i / grid;
        bool ker = false;
        double fr = flux_fraction(f.total(th), &ker);
        // at a crossing the two-sided limit: both Hurwitz terms at parameter 1
        double other = ker ? 1.0 : 1.0 - fr;
        LaurentExpansion l = laurent_coefficients(
            [&](cplx s) { return hurwitz_zeta(1.0 + s, fr) + hurwitz_zeta(1.0 + s, other); }, 0.0, -1, 0, 0.1, 64);
        out[i] = f.total_prime(th) * l.coeff(-1).real();
    });
    return out;
}

double index_via_residue(const FluxFamily& f, int grid) {
    std::vector<double> v = var_eta_form(f, grid);
    CompensatedSum<double> acc;
    for (double x : v) acc.add(x);
    return 0.5 * acc.value() * kTwoPi / grid;
}

}  // namespace adlim
