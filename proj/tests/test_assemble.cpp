#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "adlim/assemble.hpp"
#include "adlim/errors.hpp"

using namespace adlim;

namespace {

FluxFamily random_flux(std::mt19937& rng, int winding = 0) {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    std::map<int, cplx> half{{0, 0.5 + u(rng)}};
    for (int m = 1; m <= 3; ++m) half[m] = cplx(u(rng), u(rng)) / double(m);
    return FluxFamily::from_half(half, winding);
}

double relative_defect(const AssembledOperator& op) {
    double d = 0.0;
    for (std::size_t i = 0; i < op.block_count(); ++i) {
        CMatrix b = op.block_dense(i);
        d = std::max(d, hermiticity_defect(b) / b.max_abs());
    }
    return d;
}

MatrixLoop cs_loop() {
    MatrixLoop m;
    m.rows = 1;
    m.cols = 2;
    CMatrix a(1, 2), b(1, 2);
    a(0, 0) = 0.5;
    a(0, 1) = cplx(0.0, -0.5);
    b(0, 0) = 0.5;
    b(0, 1) = cplx(0.0, 0.5);
    m.fourier[1] = a;
    m.fourier[-1] = b;
    return m;
}

}  // namespace

TEST_CASE("delta_t truncations are Hermitian") {
    std::mt19937 rng(3);
    for (int i = 0; i < 5; ++i) {
        CHECK(relative_defect(assemble_delta_t(random_flux(rng), 0.1, 6, 20)) <= 1e-13);
        CHECK(relative_defect(assemble_delta_t(random_flux(rng, i % 3 - 1 == 0 ? 2 : i % 3 - 1), 0.2, 4, 12)) <= 1e-13);
    }
    CHECK(relative_defect(assemble_delta_t(cs_loop(), 1.0, 1, 8)) <= 1e-13);
}

TEST_CASE("constant flux: fiber blocks decouple and follow the block law") {
    const double t = 0.2, a = 0.3;
    const int K = 5, M = 15;
    AssembledOperator op = assemble_delta_t(FluxFamily::from_half({{0, a}}), t, K, M);
    REQUIRE(op.block_count() == static_cast<std::size_t>(2 * K + 1));
    TotalSpectrum sp = spectrum(op);
    for (std::size_t b = 0; b < sp.block_values.size(); ++b) {
        int k = sp.block_ids[b];
        std::vector<double> law;
        for (int m = -M; m <= M; ++m) {
            law.push_back(std::hypot(t * m, k + a));
            law.push_back(-std::hypot(t * m, k + a));
        }
        std::sort(law.begin(), law.end());
        REQUIRE(law.size() == sp.block_values[b].size());
        for (std::size_t i = 0; i < law.size(); ++i) CHECK(std::abs(law[i] - sp.block_values[b][i]) < 1e-12);
    }
}

TEST_CASE("flux spectra are symmetric") {
    std::mt19937 rng(11);
    TotalSpectrum sp = spectrum(assemble_delta_t(random_flux(rng), 0.1, 6, 30));
    CHECK(sp.symmetry_flag);
    for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
        CHECK(std::abs(sp.eigenvalues[i] + sp.eigenvalues[sp.eigenvalues.size() - 1 - i]) < 1e-10);
}

TEST_CASE("matrix loop [cos, sin] at t = 1") {
    const int M = 8;
    AssembledOperator op = assemble_delta_t(cs_loop(), 1.0, 1, M);
    CHECK(op.dimension() == 3 * (2 * M + 1));
    // low eigenvalues are stable under refinement of the base truncation
    std::vector<double> coarse = spectrum(op).eigenvalues;
    std::vector<double> fine = spectrum(assemble_delta_t(cs_loop(), 1.0, 1, 10 * M)).eigenvalues;
    auto near_zero = [](std::vector<double> v) {
        std::sort(v.begin(), v.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
        v.resize(5);
        std::sort(v.begin(), v.end());
        return v;
    };
    std::vector<double> c = near_zero(coarse), f = near_zero(fine);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(c[i] - f[i]) < 1e-8);
}

TEST_CASE("P_t index equals the winding") {
    for (int c : {-1, 1, 2}) {
        PtIndex p = p_t_index(FluxFamily::from_half({{0, 0.1}}, c), 0.5, 8, 8);
        CHECK(p.index == c);
    }
    CHECK(p_t_index(FluxFamily::from_half({{0, 0.5}, {1, cplx(0.0, -0.1)}}), 0.5, 8, 8).index == 0);
}

TEST_CASE("truncation sweep converges") {
    FluxFamily f = FluxFamily::from_half({{0, 0.5}, {1, cplx(0.0, -0.1)}});
    auto rows = truncation_report(f, 0.1, {{16, 32}, {32, 64}, {64, 128}});
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].difference < rows[1].difference);
    CHECK_FALSE(rows[2].diverging);
}

TEST_CASE("argument validation") {
    FluxFamily f = FluxFamily::from_half({{0, 0.5}});
    CHECK_THROWS_AS(assemble_delta_t(f, 0.0, 4, 4), DomainError);
    CHECK_THROWS_AS(assemble_delta_t(f, 0.1, 0, 4), TruncationTooSmall);
    CHECK_THROWS_AS(spectrum(assemble_p_t(f, 0.5, 4, 4)), NotSelfAdjoint);
}
