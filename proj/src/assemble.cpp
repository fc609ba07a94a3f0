#include "adlim/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "adlim/errors.hpp"

namespace adlim {

int AssembledOperator::dimension() const {
    int d = 0;
    for (const auto& b : bands) d += b.size();
    for (const auto& m : dense) d += m.rows;
    return d;
}

AssembledOperator AssembledOperator::adjoint() const {
    AssembledOperator out = *this;
    if (kind == Kind::DeltaT) return out;
    for (CMatrix& m : out.dense) m = m.adjoint();
    return out;
}

namespace {

void check_common(double t, int K, int M) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("assemble: t must be positive");
    if (K < 1 || M < 1) throw TruncationTooSmall("assemble: K and M must be >= 1");
}

// Fourier coefficients of the chain mass k_start + a(phi) + c phi/(2 pi) on [0, 2 pi S),
// in the basis e^{i n phi / S}.
cplx orbit_mass_coeff(const FluxFamily& f, int k_start, int S, int n) {
    const int c = f.winding;
    cplx v = 0.0;
    if (n == 0) {
        v += static_cast<double>(k_start) + 0.5 * c * S;
    } else {
        v += cplx(0.0, c * S / (kTwoPi * n));
    }
    if (n % S == 0) v += f.coeff(n / S);
    return v;
}

std::vector<AssembledOperator::Orbit> flux_orbits(const FluxFamily& f, int K, int M) {
    std::vector<AssembledOperator::Orbit> out;
    const int c = f.winding;
    if (c == 0) {
        for (int k = -K; k <= K; ++k) {
            AssembledOperator::Orbit o;
            o.k_start = k;
            o.segments = 1;
            for (int j = -M; j <= M; ++j) o.modes.push_back(j);
            out.push_back(o);
        }
        return out;
    }
    const int ac = std::abs(c);
    for (int r = 0; r < ac; ++r) {
        std::vector<int> ks;
        for (int k = -K; k <= K; ++k)
            if (((k - r) % ac + ac) % ac == 0) ks.push_back(k);
        if (ks.empty()) continue;
        AssembledOperator::Orbit o;
        o.k_start = c > 0 ? ks.front() : ks.back();
        o.segments = static_cast<int>(ks.size());
        const int J = o.segments * M;
        for (int j = -J; j <= J; ++j) o.modes.push_back(j);
        out.push_back(o);
    }
    return out;
}

CMatrix orbit_mass_matrix(const FluxFamily& f, const AssembledOperator::Orbit& o) {
    const int n = static_cast<int>(o.modes.size());
    CMatrix T(n, n);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) T(p, q) = orbit_mass_coeff(f, o.k_start, o.segments, o.modes[p] - o.modes[q]);
    return T;
}

}  // namespace

AssembledOperator assemble_delta_t(const Family& f, double t, int K, int M) {
    check_common(t, K, M);
    AssembledOperator op;
    op.kind = AssembledOperator::Kind::DeltaT;
    op.t = t;
    op.K = K;
    op.M = M;
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        const int P = fl->support();
        if (M < P) throw TruncationTooSmall("assemble_delta_t: M below the Fourier support of a(theta)");
        if (fl->winding == 0) {
            op.basis_doc = "per fiber mode k: index 2(m+M)+0 for (m,+), 2(m+M)+1 for (m,-), m=-M..M";
            const int n = 2 * M + 1;
            for (int k = -K; k <= K; ++k) {
                BandHermitian B(2 * n, 2 * P + 1);
                for (int i = 0; i < n; ++i) {
                    double m = i - M;
                    B.set(2 * i, 2 * i, t * m);
                    B.set(2 * i + 1, 2 * i + 1, -t * m);
                }
                // D maps (m,+) to (m',-) with amplitude k delta + a_{m'-m}
                for (int i = 0; i < n; ++i)
                    for (int ip = std::max(0, i - P); ip <= std::min(n - 1, i + P); ++ip) {
                        cplx d = fl->coeff(ip - i);
                        if (ip == i) d += static_cast<double>(k);
                        if (d == cplx(0.0)) continue;
                        int row = 2 * ip + 1, col = 2 * i;
                        if (row > col)
                            B.set(row, col, d);
                        else
                            B.set(col, row, std::conj(d));
                    }
                op.block_ids.push_back(k);
                op.bands.push_back(std::move(B));
            }
        } else {
            op.basis_doc = "per orbit k -> k + c: index 2p+0 for (nu_p,+), 2p+1 for (nu_p,-), nu_p = j_p / segments";
            op.orbits = flux_orbits(*fl, K, M);
            int r = 0;
            for (const auto& o : op.orbits) {
                CMatrix T = orbit_mass_matrix(*fl, o);
                const int n = static_cast<int>(o.modes.size());
                CMatrix H(2 * n, 2 * n);
                for (int p = 0; p < n; ++p) {
                    double nu = static_cast<double>(o.modes[p]) / o.segments;
                    H(2 * p, 2 * p) = t * nu;
                    H(2 * p + 1, 2 * p + 1) = -t * nu;
                    for (int q = 0; q < n; ++q) {
                        H(2 * p + 1, 2 * q) = T(p, q);
                        H(2 * q, 2 * p + 1) = std::conj(T(p, q));
                    }
                }
                op.block_ids.push_back(r++);
                op.dense.push_back(std::move(H));
            }
        }
        return op;
    }
    const auto& ml = std::get<MatrixLoop>(f);
    const int P = ml.support();
    if (M < P) throw TruncationTooSmall("assemble_delta_t: M below the Fourier support of the loop");
    const int nc = ml.cols, nr = ml.rows, w = nc + nr;
    const int n = 2 * M + 1;
    op.basis_doc = "index (m+M)*(cols+rows) + c: E^+ components c < cols, then E^- components";
    CMatrix H(w * n, w * n);
    for (int i = 0; i < n; ++i) {
        double m = i - M;
        for (int c = 0; c < nc; ++c) H(i * w + c, i * w + c) = t * m;
        for (int r = 0; r < nr; ++r) H(i * w + nc + r, i * w + nc + r) = -t * m;
    }
    for (auto& [q, F] : ml.fourier)
        for (int i = 0; i < n; ++i) {
            int ip = i + q;  // e^{i q theta} e^{i m theta} = e^{i (m + q) theta}
            if (ip < 0 || ip >= n) continue;
            for (int r = 0; r < nr; ++r)
                for (int c = 0; c < nc; ++c) {
                    cplx d = F(r, c);
                    if (d == cplx(0.0)) continue;
                    H(ip * w + nc + r, i * w + c) += d;
                    H(i * w + c, ip * w + nc + r) += std::conj(d);
                }
        }
    op.block_ids.push_back(0);
    op.dense.push_back(std::move(H));
    return op;
}

AssembledOperator assemble_p_t(const Family& f, double t, int K, int M) {
    check_common(t, K, M);
    const auto* fl = std::get_if<FluxFamily>(&f);
    if (!fl) throw NotSelfAdjoint("assemble_p_t: requires a fiberwise self-adjoint (flux) family");
    if (M < fl->support()) throw TruncationTooSmall("assemble_p_t: M below the Fourier support of a(theta)");
    AssembledOperator op;
    op.kind = AssembledOperator::Kind::PT;
    op.t = t;
    op.K = K;
    op.M = M;
    op.basis_doc = "per orbit: index p for e^{i nu_p phi} e^{i k x}, nu_p = j_p / segments";
    op.orbits = flux_orbits(*fl, K, M);
    int r = 0;
    for (const auto& o : op.orbits) {
        CMatrix P = orbit_mass_matrix(*fl, o);
        for (std::size_t p = 0; p < o.modes.size(); ++p)
            P(p, p) += cplx(0.0, t * static_cast<double>(o.modes[p]) / o.segments);
        op.block_ids.push_back(fl->winding == 0 ? o.k_start : r);
        ++r;
        op.dense.push_back(std::move(P));
    }
    return op;
}

TotalSpectrum spectrum(const AssembledOperator& op) {
    if (op.kind != AssembledOperator::Kind::DeltaT) throw NotSelfAdjoint("spectrum: operator is not Hermitian");
    TotalSpectrum out;
    out.t = op.t;
    out.K = op.K;
    out.M = op.M;
    out.block_ids = op.block_ids;
    const std::size_t nb = op.block_count();
    out.block_values.resize(nb);
    parallel_for(nb, [&](std::size_t i) {
        int id = op.block_ids[i];
        out.block_values[i] = op.banded() ? band_eigenvalues(op.bands[i], id) : hermitian_eigenvalues(op.dense[i], id);
    });
    for (const auto& b : out.block_values) out.eigenvalues.insert(out.eigenvalues.end(), b.begin(), b.end());
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    double mx = 0.0;
    for (double v : out.eigenvalues) mx = std::max(mx, std::abs(v));
    double dev = 0.0;
    const std::size_t n = out.eigenvalues.size();
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(out.eigenvalues[i] + out.eigenvalues[n - 1 - i]));
    out.symmetry_flag = dev <= 1e-10 * std::max(1.0, mx);
    return out;
}

Truncation heuristic_truncation(const Family& f, double t, double window) {
    if (!(t > 0.0)) throw DomainError("heuristic_truncation: t must be positive");
    Truncation tr;
    tr.window = std::max(window, 40.0 * t);
    double coupling = 0.0;
    int P = 0;
    double amax = 0.0;
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        for (auto& [m, c] : fl->coeffs)
            if (m != 0) coupling += std::abs(c);
        P = fl->support();
        amax = fl->max_abs_a();
        tr.K = static_cast<int>(std::ceil(1.05 * tr.window + amax)) + 1;
    } else {
        const auto& ml = std::get<MatrixLoop>(f);
        for (auto& [m, F] : ml.fourier)
            if (m != 0) coupling += singular_values(F).back();
        P = ml.support();
        tr.K = 1;
    }
    int pad = 16 + static_cast<int>(std::ceil(2.0 * P * coupling / t));
    tr.M = static_cast<int>(std::ceil(tr.window / t)) + pad;
    return tr;
}

std::vector<TruncationRow> truncation_report(const Family& f, double t, const std::vector<std::pair<int, int>>& km,
                                             double probe_s, double window) {
    std::vector<TruncationRow> rows;
    for (std::size_t i = 0; i < km.size(); ++i) {
        TruncationRow row;
        row.K = km[i].first;
        row.M = km[i].second;
        TotalSpectrum sp = spectrum(assemble_delta_t(f, t, row.K, row.M));
        std::vector<double> z, e;
        for (double v : sp.eigenvalues) {
            if (std::abs(v) < 1e-12) continue;
            double p = std::pow(std::abs(v), -probe_s);
            z.push_back(p);
            e.push_back(v > 0 ? p : -p);
        }
        row.probe_zeta = stable_sum(z);
        row.probe_eta = stable_sum(e);
        row.insufficient = row.M * t < window;
        if (i > 0) {
            row.difference = row.probe_zeta - rows.back().probe_zeta;
            if (i > 1 && std::abs(row.difference) > std::abs(rows.back().difference)) row.diverging = true;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string spectrum_csv(const TotalSpectrum& s) {
    std::ostringstream os;
    os.precision(17);
    os << "t,K,M,block_k,eigenvalue_index,eigenvalue\n";
    for (std::size_t b = 0; b < s.block_values.size(); ++b)
        for (std::size_t i = 0; i < s.block_values[b].size(); ++i)
            os << s.t << ',' << s.K << ',' << s.M << ',' << s.block_ids[b] << ',' << i << ',' << s.block_values[b][i]
               << '\n';
    return os.str();
}

PtIndex p_t_index(const Family& f, double t, int K, int M, double sigma_threshold) {
    AssembledOperator op = assemble_p_t(f, t, K, M);
    const auto& fl = std::get<FluxFamily>(f);
    PtIndex out;
    out.smallest_sigma = std::numeric_limits<double>::infinity();
    const std::size_t nb = op.dense.size();
    // near-null right singular vectors of P_t (kernel) and of P_t^* (cokernel)
    std::vector<SVD> svds(2 * nb);
    parallel_for(2 * nb, [&](std::size_t i) {
        svds[i] = svd(i < nb ? op.dense[i] : op.dense[i - nb].adjoint());
    });
    for (std::size_t b = 0; b < 2 * nb; ++b) {
        const auto& o = op.orbits[b % nb];
        const SVD& sv = svds[b];
        const int n = static_cast<int>(o.modes.size());
        const double L = kTwoPi * o.segments;
        const int Q = 8 * n;
        // fraction of |v|^2 on sample points where the winding ramp stays in |mass| <= K/2
        auto localized = [&](int col) {
            double in = 0.0, all = 0.0;
            for (int q = 0; q < Q; ++q) {
                double phi = L * q / Q;
                cplx v = 0.0;
                for (int p = 0; p < n; ++p) v += sv.v(p, col) * std::polar(1.0, phi * o.modes[p] / o.segments);
                double w = std::norm(v);
                all += w;
                if (std::abs(o.k_start + fl.winding * phi / kTwoPi) <= 0.5 * K) in += w;
            }
            return all > 0.0 ? in / all : 0.0;
        };
        for (int c = 0; c < n; ++c) {
            double s = sv.sigma[c];
            out.smallest_sigma = std::min(out.smallest_sigma, s);
            if (s >= sigma_threshold) continue;
            if (localized(c) > 0.5) {
                (b < nb ? out.kernel : out.cokernel) += 1;
                out.largest_kernel_sigma = std::max(out.largest_kernel_sigma, s);
            } else {
                out.spurious_sigmas.push_back(s);
            }
        }
    }
    out.index = out.kernel - out.cokernel;
    return out;
}

}  // namespace adlim
