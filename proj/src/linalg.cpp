#include "adlim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "adlim/errors.hpp"

namespace adlim {

CMatrix CMatrix::identity(int n) {
    CMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::adjoint() const {
    CMatrix m(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
}

double CMatrix::max_abs() const {
    double m = 0.0;
    for (const cplx& z : data) m = std::max(m, std::abs(z));
    return m;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols != b.rows) throw DomainError("matrix product: shape mismatch");
    CMatrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            cplx aik = a(i, k);
            if (aik == cplx(0.0)) continue;
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

CMatrix operator+(const CMatrix& a, const CMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw DomainError("matrix sum: shape mismatch");
    CMatrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw DomainError("matrix difference: shape mismatch");
    CMatrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

CMatrix operator*(cplx s, const CMatrix& a) {
    CMatrix c = a;
    for (cplx& z : c.data) z *= s;
    return c;
}

double hermiticity_defect(const CMatrix& a) {
    if (a.rows != a.cols) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j <= i; ++j) m = std::max(m, std::abs(a(i, j) - std::conj(a(j, i))));
    return m;
}

void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, CMatrix* z, int block_id) {
    const int n = static_cast<int>(d.size());
    if (n == 0) return;
    e.resize(n);
    e[n - 1] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw EigensolveFailure("tridiagonal QL: no convergence" +
                                                (block_id >= 0 ? " in block " + std::to_string(block_id) : ""),
                                            block_id);
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if (z) {
                        for (int k = 0; k < z->rows; ++k) {
                            cplx zf = (*z)(k, i + 1);
                            (*z)(k, i + 1) = s * (*z)(k, i) + c * zf;
                            (*z)(k, i) = c * (*z)(k, i) - s * zf;
                        }
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

namespace {

// Householder reduction of a Hermitian matrix to real symmetric tridiagonal form.
// On return a = Q T Q^*; if q is non-null it receives Q times the phase correction
// that makes the sub-diagonal real and non-negative.
void householder_tridiagonal(CMatrix a, std::vector<double>& d, std::vector<double>& e, CMatrix* q) {
    const int n = a.rows;
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    std::vector<cplx> sub(n, 0.0);
    std::vector<std::vector<cplx>> vs;
    std::vector<double> taus;
    std::vector<cplx> v, p, w;
    for (int k = 0; k + 2 < n; ++k) {
        const int m = n - k - 1;
        v.assign(m, 0.0);
        double xnorm2 = 0.0;
        for (int i = 0; i < m; ++i) {
            v[i] = a(k + 1 + i, k);
            xnorm2 += std::norm(v[i]);
        }
        double xnorm = std::sqrt(xnorm2);
        double tail2 = xnorm2 - std::norm(v[0]);
        if (xnorm == 0.0 || tail2 == 0.0) {
            sub[k] = v[0];
            vs.emplace_back();
            taus.push_back(0.0);
            continue;
        }
        cplx x0 = v[0];
        double ax0 = std::abs(x0);
        cplx phase = ax0 > 0.0 ? x0 / ax0 : cplx(1.0);
        cplx alpha = -phase * xnorm;
        v[0] -= alpha;
        double tau = 1.0 / (xnorm2 + xnorm * ax0);
        // p = tau * S v on the trailing block S
        p.assign(m, 0.0);
        for (int i = 0; i < m; ++i) {
            cplx acc = 0.0;
            for (int j = 0; j < m; ++j) acc += a(k + 1 + i, k + 1 + j) * v[j];
            p[i] = tau * acc;
        }
        cplx vp = 0.0;
        for (int i = 0; i < m; ++i) vp += std::conj(v[i]) * p[i];
        double kk = 0.5 * tau * vp.real();
        w.resize(m);
        for (int i = 0; i < m; ++i) w[i] = p[i] - kk * v[i];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                a(k + 1 + i, k + 1 + j) -= v[i] * std::conj(w[j]) + w[i] * std::conj(v[j]);
        sub[k] = alpha;
        for (int i = 0; i < m; ++i) {
            a(k + 1 + i, k) = i == 0 ? alpha : cplx(0.0);
            a(k, k + 1 + i) = std::conj(a(k + 1 + i, k));
        }
        vs.push_back(v);
        taus.push_back(tau);
    }
    for (int i = 0; i < n; ++i) d[i] = a(i, i).real();
    if (n >= 2) sub[n - 2] = a(n - 1, n - 2);

    std::vector<cplx> delta(n, 1.0);
    for (int k = 0; k + 1 < n; ++k) {
        double mag = std::abs(sub[k]);
        e[k] = mag;
        delta[k + 1] = mag > 0.0 ? delta[k] * sub[k] / mag : delta[k];
    }
    if (!q) return;
    *q = CMatrix::identity(n);
    for (int k = static_cast<int>(vs.size()) - 1; k >= 0; --k) {
        if (taus[k] == 0.0) continue;
        const std::vector<cplx>& vk = vs[k];
        const int m = static_cast<int>(vk.size());
        // Q <- H_k Q, applied from the last reflector backwards so Q = H_0 H_1 ...
        for (int j = 0; j < n; ++j) {
            cplx acc = 0.0;
            for (int i = 0; i < m; ++i) acc += std::conj(vk[i]) * (*q)(k + 1 + i, j);
            acc *= taus[k];
            if (acc == cplx(0.0)) continue;
            for (int i = 0; i < m; ++i) (*q)(k + 1 + i, j) -= vk[i] * acc;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) (*q)(i, j) *= delta[j];
}

}  // namespace

std::vector<double> hermitian_eigenvalues(const CMatrix& a, int block_id) {
    if (a.rows != a.cols) throw DomainError("hermitian_eigenvalues: matrix not square");
    std::vector<double> d, e;
    householder_tridiagonal(a, d, e, nullptr);
    tridiagonal_ql(d, e, nullptr, block_id);
    std::sort(d.begin(), d.end());
    return d;
}

EigenSystem hermitian_eigensystem(const CMatrix& a, int block_id) {
    if (a.rows != a.cols) throw DomainError("hermitian_eigensystem: matrix not square");
    std::vector<double> d, e;
    CMatrix z;
    householder_tridiagonal(a, d, e, &z);
    tridiagonal_ql(d, e, &z, block_id);
    const int n = a.rows;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return d[x] < d[y]; });
    EigenSystem out;
    out.values.resize(n);
    out.vectors = CMatrix(n, n);
    for (int c = 0; c < n; ++c) {
        out.values[c] = d[order[c]];
        for (int r = 0; r < n; ++r) out.vectors(r, c) = z(r, order[c]);
    }
    return out;
}

BandHermitian::BandHermitian(int n, int bandwidth)
    : n_(n), b_(std::max(0, bandwidth)), w_(b_ + 1), lower_(static_cast<std::size_t>(n) * (w_ + 1), 0.0) {}

cplx BandHermitian::get(int i, int j) const {
    if (i >= j) return (i - j <= w_) ? at(i, i - j) : cplx(0.0);
    return std::conj(get(j, i));
}

void BandHermitian::set(int i, int j, cplx v) {
    if (i < j) {
        set(j, i, std::conj(v));
        return;
    }
    if (i - j > w_) {
        if (v != cplx(0.0)) throw DomainError("BandHermitian: entry outside band");
        return;
    }
    if (i == j) v = v.real();
    at(i, i - j) = v;
}

void BandHermitian::add(int i, int j, cplx v) { set(i, j, get(i, j) + v); }

CMatrix BandHermitian::dense() const {
    CMatrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = std::max(0, i - w_); j <= std::min(n_ - 1, i + w_); ++j) m(i, j) = get(i, j);
    return m;
}

void BandHermitian::rotate(int p, double c, cplx s) {
    const int q = p + 1;
    const int lo = std::max(0, p - w_);
    const int hi = std::min(n_ - 1, q + w_);
    for (int x = lo; x <= hi; ++x) {
        if (x == p || x == q) continue;
        cplx apx = get(p, x);
        cplx aqx = get(q, x);
        if (apx == cplx(0.0) && aqx == cplx(0.0)) continue;
        cplx npx = c * apx + s * aqx;
        cplx nqx = -std::conj(s) * apx + c * aqx;
        if (std::abs(p - x) <= w_) set(p, x, npx);
        if (std::abs(q - x) <= w_) set(q, x, nqx);
    }
    cplx app = get(p, p), aqq = get(q, q), aqp = get(q, p);
    cplx apq = std::conj(aqp);
    cplx m00 = c * app + s * aqp;
    cplx m01 = c * apq + s * aqq;
    cplx m10 = -std::conj(s) * app + c * aqp;
    cplx m11 = -std::conj(s) * apq + c * aqq;
    cplx n00 = m00 * c + m01 * std::conj(s);
    cplx n10 = m10 * c + m11 * std::conj(s);
    cplx n11 = -m10 * s + m11 * c;
    set(p, p, n00.real());
    set(q, q, n11.real());
    set(q, p, n10);
}

void BandHermitian::reduce_to_tridiagonal(std::vector<double>& d, std::vector<double>& e) {
    auto annihilate = [&](int r, int col) {
        // zero A(r, col) against A(r-1, col) with a rotation in the plane (r-1, r)
        cplx f = get(r - 1, col);
        cplx g = get(r, col);
        if (g == cplx(0.0)) return;
        double af = std::abs(f);
        double rr = std::hypot(af, std::abs(g));
        double c;
        cplx s;
        if (af == 0.0) {
            c = 0.0;
            s = 1.0;
        } else {
            c = af / rr;
            s = (f / af) * std::conj(g) / rr;
        }
        rotate(r - 1, c, s);
        at(r, r - col) = 0.0;
    };
    if (b_ > 1) {
        for (int j = 0; j + 2 < n_; ++j) {
            for (int i = std::min(j + b_, n_ - 1); i >= j + 2; --i) {
                if (get(i, j) == cplx(0.0)) continue;
                annihilate(i, j);
                int r = i + b_;
                int col = i - 1;
                while (r < n_) {
                    if (get(r, col) == cplx(0.0)) break;
                    annihilate(r, col);
                    col = r - 1;
                    r += b_;
                }
            }
        }
    }
    d.assign(n_, 0.0);
    e.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) d[i] = get(i, i).real();
    for (int i = 0; i + 1 < n_; ++i) e[i] = std::abs(get(i + 1, i));
}

std::vector<double> band_eigenvalues(BandHermitian a, int block_id) {
    std::vector<double> d, e;
    a.reduce_to_tridiagonal(d, e);
    tridiagonal_ql(d, e, nullptr, block_id);
    std::sort(d.begin(), d.end());
    return d;
}

SVD svd(const CMatrix& a) {
    const int m = a.rows;
    const int n = a.cols;
    CMatrix w = a;
    CMatrix v = CMatrix::identity(n);
    const double tol = 1e-15;
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0;
                cplx gamma = 0.0;
                for (int i = 0; i < m; ++i) {
                    alpha += std::norm(w(i, p));
                    beta += std::norm(w(i, q));
                    gamma += std::conj(w(i, p)) * w(i, q);
                }
                double ag = std::abs(gamma);
                if (ag == 0.0 || ag <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                cplx ph = std::conj(gamma) / ag;  // multiplies column q to make the overlap real
                double zeta = (beta - alpha) / (2.0 * ag);
                double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int i = 0; i < m; ++i) {
                    cplx xp = w(i, p);
                    cplx xq = w(i, q) * ph;
                    w(i, p) = c * xp - s * xq;
                    w(i, q) = s * xp + c * xq;
                }
                for (int i = 0; i < n; ++i) {
                    cplx xp = v(i, p);
                    cplx xq = v(i, q) * ph;
                    v(i, p) = c * xp - s * xq;
                    v(i, q) = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
        if (sweep == 79) throw EigensolveFailure("svd: Jacobi sweeps did not converge");
    }
    std::vector<double> sig(n);
    for (int j = 0; j < n; ++j) {
        double s2 = 0.0;
        for (int i = 0; i < m; ++i) s2 += std::norm(w(i, j));
        sig[j] = std::sqrt(s2);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sig[x] < sig[y]; });
    SVD out;
    out.sigma.resize(n);
    out.u = CMatrix(m, n);
    out.v = CMatrix(n, n);
    for (int c = 0; c < n; ++c) {
        int j = order[c];
        out.sigma[c] = sig[j];
        for (int i = 0; i < n; ++i) out.v(i, c) = v(i, j);
        if (sig[j] > 0.0)
            for (int i = 0; i < m; ++i) out.u(i, c) = w(i, j) / sig[j];
    }
    return out;
}

std::vector<double> singular_values(const CMatrix& a) { return svd(a).sigma; }

CMatrix inverse(const CMatrix& a) {
    if (a.rows != a.cols) throw DomainError("inverse: matrix not square");
    const int n = a.rows;
    CMatrix m = a;
    CMatrix inv = CMatrix::identity(n);
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
        if (std::abs(m(piv, col)) == 0.0) throw NotInvertible("inverse: singular matrix", 0.0);
        if (piv != col)
            for (int j = 0; j < n; ++j) {
                std::swap(m(piv, j), m(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        cplx d = 1.0 / m(col, col);
        for (int j = 0; j < n; ++j) {
            m(col, j) *= d;
            inv(col, j) *= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            cplx f = m(r, col);
            if (f == cplx(0.0)) continue;
            for (int j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

LeastSquaresFit least_squares(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs,
                              const std::vector<double>& weights) {
    const int m = static_cast<int>(rows.size());
    if (m == 0 || rhs.size() != rows.size() || weights.size() != rows.size())
        throw DomainError("least_squares: inconsistent sizes");
    const int n = static_cast<int>(rows[0].size());
    if (m < n) throw DomainError("least_squares: underdetermined system");
    // Column scaling keeps the reported condition number meaningful.
    CMatrix a(m, n);
    std::vector<double> scale(n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) scale[j] = std::max(scale[j], std::abs(rows[i][j] * weights[i]));
    for (int j = 0; j < n; ++j)
        if (scale[j] == 0.0) scale[j] = 1.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rows[i][j] * weights[i] / scale[j];
    SVD s = svd(a);
    LeastSquaresFit fit;
    double smax = s.sigma.back();
    double smin = s.sigma.front();
    fit.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > 0.0)) throw IllConditioned("least_squares: rank-deficient design matrix");
    std::vector<double> y(n, 0.0);
    for (int c = 0; c < n; ++c) {
        double proj = 0.0;
        for (int i = 0; i < m; ++i) proj += s.u(i, c).real() * rhs[i] * weights[i];
        proj /= s.sigma[c];
        for (int j = 0; j < n; ++j) y[j] += s.v(j, c).real() * proj;
    }
    fit.coefficients.resize(n);
    fit.unit_std_errors.resize(n);
    for (int j = 0; j < n; ++j) {
        fit.coefficients[j] = y[j] / scale[j];
        double var = 0.0;
        for (int c = 0; c < n; ++c) var += std::norm(s.v(j, c)) / (s.sigma[c] * s.sigma[c]);
        fit.unit_std_errors[j] = std::sqrt(var) / scale[j];
    }
    double r2 = 0.0;
    for (int i = 0; i < m; ++i) {
        double pred = 0.0;
        for (int j = 0; j < n; ++j) pred += rows[i][j] * fit.coefficients[j];
        double r = (rhs[i] - pred) * weights[i];
        r2 += r * r;
    }
    fit.residual_norm = std::sqrt(r2);
    return fit;
}

}  // namespace adlim
