#pragma once

#include <string>
#include <vector>

#include "adlim/families.hpp"
#include "adlim/linalg.hpp"

namespace adlim {

// Fourier truncation of delta_t (Hermitian) or P_t (not Hermitian).
//
// Flux families without winding decouple by fiber mode k: block k is stored as a band
// matrix in the interleaved basis (m, +), (m, -), m = -M..M. Matrix loops use one dense
// block with per-mode layout (E^+ components, then E^- components). Winding families use
// one dense block per orbit k -> k + c of fiber modes (quasi-periodic reduction).
struct AssembledOperator {
    enum class Kind { DeltaT, PT };
    Kind kind = Kind::DeltaT;
    double t = 0.0;
    int K = 0;
    int M = 0;
    std::string basis_doc;

    std::vector<int> block_ids;  // fiber mode k, orbit residue, or 0
    std::vector<BandHermitian> bands;
    std::vector<CMatrix> dense;

    // Quasi-periodic orbit data, one entry per dense block (winding families only).
    struct Orbit {
        int k_start = 0;
        int segments = 1;
        std::vector<int> modes;  // j with nu = j / segments
    };
    std::vector<Orbit> orbits;

    bool banded() const { return !bands.empty(); }
    std::size_t block_count() const { return banded() ? bands.size() : dense.size(); }
    CMatrix block_dense(std::size_t i) const { return banded() ? bands[i].dense() : dense[i]; }
    int dimension() const;
    // Adjoint operator (identity for delta_t).
    AssembledOperator adjoint() const;
};

AssembledOperator assemble_delta_t(const Family& f, double t, int K, int M);
AssembledOperator assemble_p_t(const Family& f, double t, int K, int M);

struct TotalSpectrum {
    double t = 0.0;
    int K = 0;
    int M = 0;
    std::vector<double> eigenvalues;               // all blocks, ascending
    std::vector<int> block_ids;
    std::vector<std::vector<double>> block_values;  // per block, ascending
    bool symmetry_flag = false;
};

TotalSpectrum spectrum(const AssembledOperator& op);

// Truncation from the energy window: K = ceil(1.05 L + max|a|) + 1, M = ceil(L / t) + pad,
// where L = max(window, 40 t) and pad grows with the coupling strength of a(theta).
struct Truncation {
    int K = 0;
    int M = 0;
    double window = 0.0;  // effective energy window
};
Truncation heuristic_truncation(const Family& f, double t, double window = 8.0);

struct TruncationRow {
    int K = 0;
    int M = 0;
    double probe_zeta = 0.0;  // sum |lambda|^-s
    double probe_eta = 0.0;   // sum sign(lambda) |lambda|^-s
    double difference = 0.0;  // change of probe_zeta from the previous row
    bool insufficient = false;  // M t below the energy window
    bool diverging = false;     // difference grew compared to the previous row
};

std::vector<TruncationRow> truncation_report(const Family& f, double t, const std::vector<std::pair<int, int>>& km,
                                             double probe_s = 4.0, double window = 8.0);

// CSV columns t,K,M,block_k,eigenvalue_index,eigenvalue.
std::string spectrum_csv(const TotalSpectrum& s);

// Index of P_t from near-zero singular vectors localized away from the truncation edge:
// #ker P_t - #ker P_t^*.
struct PtIndex {
    int index = 0;
    int kernel = 0;
    int cokernel = 0;
    double smallest_sigma = 0.0;
    double largest_kernel_sigma = 0.0;
    std::vector<double> spurious_sigmas;  // small singular values rejected by localization
};
PtIndex p_t_index(const Family& f, double t, int K, int M, double sigma_threshold = 1e-6);

}  // namespace adlim
