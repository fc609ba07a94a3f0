#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace adlim {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
inline constexpr double kSqrtPi = 1.77245385090551602729816748334114518;

// Neumaier compensated accumulator.
template <class T>
class CompensatedSum {
public:
    void add(T x) {
        T t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(T x) {
        add(x);
        return *this;
    }
    T value() const { return sum_ + comp_; }

private:
    T sum_{};
    T comp_{};
};

// Sum in ascending magnitude order with compensation; input is copied.
double stable_sum(std::vector<double> v);
cplx stable_sum(std::vector<cplx> v);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1]; cached per n.
const QuadratureRule& gauss_legendre(int n);

// Composite Gauss-Legendre rule on [a, b] with `panels` panels of `order` nodes.
QuadratureRule composite_gauss(double a, double b, int panels, int order);

// Uniform periodic grid theta_j = 2*pi*j/n.
std::vector<double> uniform_theta_grid(int n);

// Worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n). Results must be written to per-index slots so
// that the caller can reduce them in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

bool is_finite(cplx z);

}  // namespace adlim
