#pragma once

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "adlim/linalg.hpp"
#include "adlim/numerics.hpp"

namespace adlim {

// D(theta) = -i d/dx + a(theta) + c*theta/(2 pi) on the fiber circle, with
// a(theta) = sum_m coeff[m] e^{i m theta}, coeff[-m] = conj(coeff[m]).
struct FluxFamily {
    std::string name;
    std::map<int, cplx> coeffs;  // both signs of m are stored
    int winding = 0;
    int fiber_mode_cutoff = 8;

    // Builds a family from the non-negative half of the coefficients.
    static FluxFamily from_half(std::map<int, cplx> half, int winding = 0, std::string name = {});

    cplx coeff(int m) const;
    int support() const;  // max |m| with a nonzero coefficient
    double a(double theta) const;
    double a_prime(double theta) const;
    double total(double theta) const { return a(theta) + winding * theta / kTwoPi; }
    double total_prime(double theta) const { return a_prime(theta) + winding / kTwoPi; }
    double max_abs_a() const;  // upper bound sum |coeff|
    double max_abs_a_prime() const;
};

// theta-periodic rows x cols matrix D(theta) = sum_m F_m e^{i m theta}, mapping C^cols -> C^rows.
struct MatrixLoop {
    std::string name;
    int rows = 1;
    int cols = 1;
    std::map<int, CMatrix> fourier;

    CMatrix at(double theta) const;
    CMatrix derivative(double theta) const;
    int support() const;
    int index() const { return cols - rows; }
    // True when D(theta) is square and Hermitian for every theta.
    bool hermitian() const;
};

using Family = std::variant<FluxFamily, MatrixLoop>;

const std::string& family_name(const Family& f);

// JSON family description; throws ConfigError naming the violated invariant.
Family parse_family(const std::string& json_text);
Family load_family(const std::string& path);
std::string family_to_json(const Family& f);
// Stable content hash of the canonical JSON form.
std::string family_hash(const Family& f);

struct FiberSpectralData {
    double theta = 0.0;
    std::vector<double> values;  // eigenvalues (flux) or singular values (matrix loop), ascending
    int kernel_dim = 0;
    double kernel_threshold = 0.0;
};

double default_kernel_threshold(double max_abs_value);

FiberSpectralData fiber_spectrum(const Family& f, double theta, int K);

// Fractional part of the flux in (0, 1]; sets *kernel when the total flux is an integer.
double flux_fraction(double total, bool* kernel);

cplx fiber_zeta_bar(const Family& f, double theta, cplx s);
cplx fiber_eta_bar(const Family& f, double theta, cplx s);
// zeta(D(theta), -1) on the complement of the kernel.
double tr_zeta_abs(const Family& f, double theta);
// Residue at s = 0 of s -> zeta(D(theta), s - 1).
double tr_w_abs(const Family& f, double theta);

struct CoverArc {
    int begin = 0;   // first grid index (inclusive, may wrap)
    int length = 0;  // number of grid points covered
    double level = 0.0;  // singular-value level beta_j
    int rank = 0;        // dim of the low space below the level
};

// Finite-rank stabilization D_U = [[L, D12], [D21, D22]] of a loop; L is the low-mode
// window of D (the whole matrix for a matrix loop). High fiber modes are left untouched.
struct StabilizedFamily {
    Family base;
    int grid_points = 720;
    std::vector<CoverArc> cover;
    double overlap = 0.0;  // overlap half-width, in grid steps
    int u_plus_dim = 0;
    int u_minus_dim = 0;
    int window_k_min = 0;  // flux window of fiber modes (empty for a matrix loop)
    int window_k_max = -1;

    // Blocks at theta; stored as callables built from the cover data.
    std::function<CMatrix(double)> d_u;
    std::function<CMatrix(double)> d_u_prime;
    std::function<CMatrix(double)> window;        // L(theta)
    std::function<double(double)> bump;           // sum of bumps, for diagnostics
    // Ends of the bump transitions in [0, 2 pi); D_U is smooth between consecutive points.
    std::vector<double> breakpoints;

    bool empty() const { return u_plus_dim == 0 && u_minus_dim == 0; }
    int index() const { return u_minus_dim - u_plus_dim; }
};

struct StabilizeOptions {
    int grid_points = 720;
    double overlap_fraction = 0.25;  // of the shorter neighbouring arc
    double level_margin = 0.05;      // relative gap to the spectrum required around a level
    unsigned seed = 12345;           // frame of the cokernel
    double level_shift = 0.0;        // relative offset of each level inside its gap
    // Lowest admissible level (small arcs around the kernel) or the level with the longest arc.
    enum class LevelChoice { Lowest, LongestArc } choice = LevelChoice::Lowest;
};

StabilizedFamily stabilize(const Family& f, const StabilizeOptions& opt = {});

// Smallest singular value of D_U over the stabilization grid.
double min_singular_value(const StabilizedFamily& sf);

}  // namespace adlim
