#pragma once

#include <vector>

#include "adlim/numerics.hpp"

namespace adlim {

// Dense row-major complex matrix.
struct CMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> data;

    CMatrix() = default;
    CMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

    cplx& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    const cplx& operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    static CMatrix identity(int n);
    CMatrix adjoint() const;
    double max_abs() const;
};

CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
CMatrix operator*(cplx s, const CMatrix& a);

// max |A - A^*|.
double hermiticity_defect(const CMatrix& a);

struct EigenSystem {
    std::vector<double> values;  // ascending
    CMatrix vectors;             // columns match values
};

// Implicit QL on a real symmetric tridiagonal matrix. d: diagonal (n), e: sub-diagonal
// (n, last entry unused). If z is non-null its columns are rotated alongside.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, CMatrix* z, int block_id = -1);

// Householder tridiagonalization followed by implicit QL.
std::vector<double> hermitian_eigenvalues(const CMatrix& a, int block_id = -1);
EigenSystem hermitian_eigensystem(const CMatrix& a, int block_id = -1);

// Hermitian band matrix with `bandwidth` sub-diagonals; stores A(i, i-d) for d in [0, bandwidth+1]
// (one spare diagonal holds the bulge during reduction).
class BandHermitian {
public:
    BandHermitian(int n, int bandwidth);

    int size() const { return n_; }
    int bandwidth() const { return b_; }
    cplx get(int i, int j) const;
    void set(int i, int j, cplx v);
    void add(int i, int j, cplx v);
    CMatrix dense() const;

    // Reduces to real symmetric tridiagonal form by Givens bulge chasing; returns (d, |e|).
    void reduce_to_tridiagonal(std::vector<double>& d, std::vector<double>& e);

private:
    int n_;
    int b_;
    int w_;  // storage width b_ + 1
    std::vector<cplx> lower_;

    bool stored(int i, int j) const { return i >= j && i - j <= w_; }
    cplx& at(int i, int d) { return lower_[static_cast<std::size_t>(i) * (w_ + 1) + d]; }
    const cplx& at(int i, int d) const { return lower_[static_cast<std::size_t>(i) * (w_ + 1) + d]; }
    void rotate(int p, double c, cplx s);
};

std::vector<double> band_eigenvalues(BandHermitian a, int block_id = -1);

// One-sided Jacobi SVD: a * v = u * diag(sigma). sigma ascending, one value per column of a.
struct SVD {
    std::vector<double> sigma;
    CMatrix u;  // rows(a) x cols(a), zero columns where sigma == 0
    CMatrix v;  // cols(a) x cols(a), unitary
};
SVD svd(const CMatrix& a);
std::vector<double> singular_values(const CMatrix& a);

// Inverse of a square matrix by Gauss-Jordan with partial pivoting.
CMatrix inverse(const CMatrix& a);

struct LeastSquaresFit {
    std::vector<double> coefficients;
    std::vector<double> unit_std_errors;  // sqrt(diag((A^T W A)^{-1}))
    double residual_norm = 0.0;           // weighted
    double condition = 0.0;
};

// Weighted linear least squares via SVD. rows: design matrix rows.
LeastSquaresFit least_squares(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs,
                              const std::vector<double>& weights);

}  // namespace adlim
