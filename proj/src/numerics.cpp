#include "adlim/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace adlim {

double stable_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    CompensatedSum<double> s;
    for (double x : v) s.add(x);
    return s.value();
}

cplx stable_sum(std::vector<cplx> v) {
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    CompensatedSum<double> re, im;
    for (cplx x : v) {
        re.add(x.real());
        im.add(x.imag());
    }
    return {re.value(), im.value()};
}

namespace {

QuadratureRule build_gauss_legendre(int n) {
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return r;
}

std::mutex g_gl_mutex;
std::map<int, QuadratureRule> g_gl_cache;
std::atomic<int> g_threads{0};
thread_local bool t_in_worker = false;

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
    std::lock_guard<std::mutex> lock(g_gl_mutex);
    auto it = g_gl_cache.find(n);
    if (it == g_gl_cache.end()) it = g_gl_cache.emplace(n, build_gauss_legendre(n)).first;
    return it->second;
}

QuadratureRule composite_gauss(double a, double b, int panels, int order) {
    const QuadratureRule& g = gauss_legendre(order);
    QuadratureRule r;
    r.nodes.reserve(static_cast<std::size_t>(panels) * order);
    r.weights.reserve(static_cast<std::size_t>(panels) * order);
    double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * h;
        for (int i = 0; i < order; ++i) {
            r.nodes.push_back(lo + 0.5 * h * (g.nodes[i] + 1.0));
            r.weights.push_back(0.5 * h * g.weights[i]);
        }
    }
    return r;
}

std::vector<double> uniform_theta_grid(int n) {
    std::vector<double> g(n);
    for (int j = 0; j < n; ++j) g[j] = kTwoPi * j / n;
    return g;
}

void set_thread_count(int n) { g_threads = std::max(0, n); }

int thread_count() {
    int n = g_threads.load();
    if (n > 0) return n;
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(thread_count()));
    if (workers <= 1 || t_in_worker) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        bool outer = t_in_worker;
        t_in_worker = true;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
        t_in_worker = outer;
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace adlim
