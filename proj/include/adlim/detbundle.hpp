#pragma once

#include <string>
#include <vector>

#include "adlim/families.hpp"

namespace adlim {

// Samples of the Bismut-Freed form A(theta; s) = Gamma(1 + s/2) Tr((D^*D)^{-s/2} D^{-1} dD/dtheta).
struct ConnectionFormSample {
    std::vector<double> theta;
    std::vector<cplx> s_values;
    std::vector<std::vector<cplx>> values;  // [s index][theta index]
    std::vector<cplx> regularized_at_zero;  // A(theta; 0)
};

// Pointwise values. Flux families use the Hurwitz closed form, matrix loops a direct trace.
cplx bf_value(const Family& f, double theta, cplx s);
cplx bf_value_at_zero(const Family& f, double theta);
cplx bf_value(const StabilizedFamily& sf, double theta, cplx s);
cplx bf_value_at_zero(const StabilizedFamily& sf, double theta);

// Low-mode window of a stabilized flux family: direct trace on L(theta) and the same sum in
// closed form; they must agree.
cplx bf_window_direct(const StabilizedFamily& sf, double theta, cplx s);
cplx bf_window_closed(const StabilizedFamily& sf, double theta, cplx s);

// grid must be a power of two.
ConnectionFormSample bf_form(const Family& f, const std::vector<cplx>& s, int grid = 256);
ConnectionFormSample bf_form(const StabilizedFamily& sf, const std::vector<cplx>& s, int grid = 256);

std::string connection_form_csv(const ConnectionFormSample& c);

// exp(-integral of A(0)). Plain families: periodic trapezoid. Stabilized families: Gauss-Legendre
// panels between bump breakpoints, where D_U is only piecewise smooth.
cplx holonomy(const Family& f, int grid = 1024);
cplx holonomy(const StabilizedFamily& sf, int grid = 1024);

struct Crossing {
    double theta = 0.0;
    int direction = 0;  // +1 upward through 0
    int mode = 0;       // fiber mode k of the branch k + a(theta) + c theta / 2pi
};

struct SpectralFlowRecord {
    std::vector<Crossing> crossings;
    std::vector<Crossing> tangential;  // touches of 0 without sign change; not counted
    int total = 0;
};

inline constexpr double kCrossingTolerance = 1e-10;

SpectralFlowRecord spectral_flow(const FluxFamily& f, int grid = 1024);
std::string to_json(const SpectralFlowRecord& r);

// Tr_w((D^2)^{-1/2} dD/dtheta) per grid point: derivative of the total flux times the residue
// at s = 0 of zeta_H(1+s, frac) + zeta_H(1+s, 1-frac).
std::vector<double> var_eta_form(const FluxFamily& f, int grid = 256);
// Half the integral of var_eta_form.
double index_via_residue(const FluxFamily& f, int grid = 256);

}  // namespace adlim
