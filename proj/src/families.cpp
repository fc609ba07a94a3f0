#include "adlim/families.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adlim/errors.hpp"
#include "adlim/specfun.hpp"

namespace adlim {

using nlohmann::json;

FluxFamily FluxFamily::from_half(std::map<int, cplx> half, int winding, std::string name) {
    FluxFamily f;
    f.name = std::move(name);
    f.winding = winding;
    for (auto& [m, c] : half) {
        if (m < 0) throw ConfigError("flux family: from_half expects m >= 0");
        if (m == 0) {
            f.coeffs[0] = c.real();
        } else {
            f.coeffs[m] = c;
            f.coeffs[-m] = std::conj(c);
        }
    }
    return f;
}

cplx FluxFamily::coeff(int m) const {
    auto it = coeffs.find(m);
    return it == coeffs.end() ? cplx(0.0) : it->second;
}

int FluxFamily::support() const {
    int p = 0;
    for (auto& [m, c] : coeffs)
        if (c != cplx(0.0)) p = std::max(p, std::abs(m));
    return p;
}

double FluxFamily::a(double theta) const {
    double v = 0.0;
    for (auto& [m, c] : coeffs) v += (c * std::polar(1.0, m * theta)).real();
    return v;
}

double FluxFamily::a_prime(double theta) const {
    double v = 0.0;
    for (auto& [m, c] : coeffs) v += (cplx(0.0, m) * c * std::polar(1.0, m * theta)).real();
    return v;
}

double FluxFamily::max_abs_a() const {
    double v = 0.0;
    for (auto& [m, c] : coeffs) v += std::abs(c);
    return v;
}

double FluxFamily::max_abs_a_prime() const {
    double v = 0.0;
    for (auto& [m, c] : coeffs) v += std::abs(m) * std::abs(c);
    return v;
}

CMatrix MatrixLoop::at(double theta) const {
    CMatrix d(rows, cols);
    for (auto& [m, f] : fourier) {
        cplx e = std::polar(1.0, m * theta);
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += f.data[i] * e;
    }
    return d;
}

CMatrix MatrixLoop::derivative(double theta) const {
    CMatrix d(rows, cols);
    for (auto& [m, f] : fourier) {
        cplx e = cplx(0.0, m) * std::polar(1.0, m * theta);
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += f.data[i] * e;
    }
    return d;
}

int MatrixLoop::support() const {
    int p = 0;
    for (auto& [m, f] : fourier)
        if (f.max_abs() > 0.0) p = std::max(p, std::abs(m));
    return p;
}

bool MatrixLoop::hermitian() const {
    if (rows != cols) return false;
    for (auto& [m, f] : fourier) {
        auto it = fourier.find(-m);
        CMatrix partner = it == fourier.end() ? CMatrix(rows, cols) : it->second;
        if ((f - partner.adjoint()).max_abs() > 1e-14 * (1.0 + f.max_abs())) return false;
    }
    return true;
}

const std::string& family_name(const Family& f) {
    return std::visit([](const auto& x) -> const std::string& { return x.name; }, f);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(std::string(what) + ": unknown key '" + it.key() + "'");
}

int as_int(const json& v, const char* what) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == std::round(d)) return static_cast<int>(d);
    }
    throw ConfigError(std::string(what) + ": expected an integer");
}

double as_real(const json& v, const char* what) {
    if (!v.is_number()) throw ConfigError(std::string(what) + ": expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(std::string(what) + ": non-finite number");
    return d;
}

FluxFamily parse_flux(const json& j) {
    reject_unknown_keys(j, {"type", "name", "fourier", "winding", "fiber_mode_cutoff", "metric"}, "flux family");
    FluxFamily f;
    f.name = j.value("name", std::string("flux"));
    if (j.contains("winding")) f.winding = as_int(j["winding"], "flux family: winding");
    if (j.contains("fiber_mode_cutoff")) {
        f.fiber_mode_cutoff = as_int(j["fiber_mode_cutoff"], "flux family: fiber_mode_cutoff");
        if (f.fiber_mode_cutoff < 1) throw ConfigError("flux family: fiber_mode_cutoff must be >= 1");
    }
    if (!j.contains("fourier") || !j["fourier"].is_array())
        throw ConfigError("flux family: 'fourier' must be a list of [m, re, im]");
    for (const json& row : j["fourier"]) {
        if (!row.is_array() || row.size() != 3) throw ConfigError("flux family: Fourier entry must be [m, re, im]");
        int m = as_int(row[0], "flux family: Fourier index");
        cplx c(as_real(row[1], "flux family: Fourier re"), as_real(row[2], "flux family: Fourier im"));
        if (f.coeffs.count(m)) throw ConfigError("flux family: duplicate Fourier index " + std::to_string(m));
        f.coeffs[m] = c;
    }
    // Reality: a(theta) real requires coeff(-m) = conj(coeff(m)); a missing partner is implied.
    std::map<int, cplx> full = f.coeffs;
    for (auto& [m, c] : f.coeffs) {
        if (m == 0) {
            if (std::abs(c.imag()) > 1e-14) throw ConfigError("flux family: reality violated, coefficient 0 is not real");
            full[0] = c.real();
            continue;
        }
        auto it = f.coeffs.find(-m);
        if (it == f.coeffs.end()) {
            full[-m] = std::conj(c);
        } else if (std::abs(it->second - std::conj(c)) > 1e-14 * (1.0 + std::abs(c))) {
            throw ConfigError("flux family: reality violated, coefficients " + std::to_string(m) + " and " +
                              std::to_string(-m) + " are not conjugate");
        }
    }
    f.coeffs = full;
    return f;
}

CMatrix parse_block(const json& re, const json* im, int rows, int cols) {
    CMatrix m(rows, cols);
    auto fill = [&](const json& src, bool imag) {
        if (!src.is_array() || static_cast<int>(src.size()) != rows)
            throw ConfigError("matrix loop: Fourier block has wrong number of rows");
        for (int i = 0; i < rows; ++i) {
            if (!src[i].is_array() || static_cast<int>(src[i].size()) != cols)
                throw ConfigError("matrix loop: Fourier block has wrong number of columns");
            for (int k = 0; k < cols; ++k) {
                double v = as_real(src[i][k], "matrix loop: entry");
                if (imag)
                    m(i, k) += cplx(0.0, v);
                else
                    m(i, k) += v;
            }
        }
    };
    fill(re, false);
    if (im) fill(*im, true);
    return m;
}

MatrixLoop parse_matrix_loop(const json& j) {
    reject_unknown_keys(j, {"type", "name", "rows", "cols", "fourier", "metric"}, "matrix loop");
    MatrixLoop ml;
    ml.name = j.value("name", std::string("matrix_loop"));
    if (!j.contains("rows") || !j.contains("cols")) throw ConfigError("matrix loop: 'rows' and 'cols' are required");
    ml.rows = as_int(j["rows"], "matrix loop: rows");
    ml.cols = as_int(j["cols"], "matrix loop: cols");
    if (ml.rows < 1 || ml.cols < 1) throw ConfigError("matrix loop: shape must be positive");
    if (!j.contains("fourier") || !j["fourier"].is_array())
        throw ConfigError("matrix loop: 'fourier' must be a list of blocks");
    for (const json& blk : j["fourier"]) {
        if (!blk.is_object()) throw ConfigError("matrix loop: Fourier block must be an object");
        reject_unknown_keys(blk, {"m", "re", "im"}, "matrix loop block");
        if (!blk.contains("m") || !blk.contains("re")) throw ConfigError("matrix loop: block needs 'm' and 're'");
        int m = as_int(blk["m"], "matrix loop: m");
        if (ml.fourier.count(m)) throw ConfigError("matrix loop: duplicate Fourier index " + std::to_string(m));
        const json* im = blk.contains("im") ? &blk["im"] : nullptr;
        ml.fourier[m] = parse_block(blk["re"], im, ml.rows, ml.cols);
    }
    if (ml.fourier.empty()) ml.fourier[0] = CMatrix(ml.rows, ml.cols);
    return ml;
}

json block_json(const CMatrix& m, bool imag) {
    json out = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols; ++k) row.push_back(imag ? m(i, k).imag() : m(i, k).real());
        out.push_back(row);
    }
    return out;
}

}  // namespace

Family parse_family(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("family file: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("family file: top level must be an object");
    if (j.contains("metric") && j["metric"] != "product")
        throw ConfigError("family file: only the product metric is supported");
    std::string type = j.value("type", std::string());
    if (type == "flux") return parse_flux(j);
    if (type == "matrix_loop") return parse_matrix_loop(j);
    throw ConfigError("family file: 'type' must be \"flux\" or \"matrix_loop\"");
}

Family load_family(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("family file: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_family(ss.str());
}

std::string family_to_json(const Family& f) {
    json j;
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        j["type"] = "flux";
        j["name"] = fl->name;
        j["winding"] = fl->winding;
        j["fiber_mode_cutoff"] = fl->fiber_mode_cutoff;
        json rows = json::array();
        for (auto& [m, c] : fl->coeffs)
            if (m >= 0) rows.push_back(json::array({m, c.real(), c.imag()}));
        j["fourier"] = rows;
    } else {
        const auto& ml = std::get<MatrixLoop>(f);
        j["type"] = "matrix_loop";
        j["name"] = ml.name;
        j["rows"] = ml.rows;
        j["cols"] = ml.cols;
        json blocks = json::array();
        for (auto& [m, b] : ml.fourier) blocks.push_back({{"m", m}, {"re", block_json(b, false)}, {"im", block_json(b, true)}});
        j["fourier"] = blocks;
    }
    return j.dump();
}

std::string family_hash(const Family& f) {
    std::string s = family_to_json(f);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Fiber spectral data

double default_kernel_threshold(double max_abs_value) { return 1e-9 * (1.0 + max_abs_value); }

double flux_fraction(double total, bool* kernel) {
    double fr = total - std::floor(total);
    bool ker = fr < 1e-12 || fr > 1.0 - 1e-12;
    if (kernel) *kernel = ker;
    if (ker) return 1.0;
    return fr;
}

namespace {

std::vector<double> loop_singular_values(const MatrixLoop& ml, double theta) {
    // from the SVD: sqrt of eig(D^* D) turns a 1e-17 rounding residue into a 1e-9 "mode"
    std::vector<double> sv = singular_values(ml.at(theta));
    std::sort(sv.begin(), sv.end());
    return sv;
}

}  // namespace

FiberSpectralData fiber_spectrum(const Family& f, double theta, int K) {
    if (K < 1) throw DomainError("fiber_spectrum: K must be >= 1");
    FiberSpectralData out;
    out.theta = theta;
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        double tot = fl->total(theta);
        for (int k = -K; k <= K; ++k) out.values.push_back(k + tot);
        std::sort(out.values.begin(), out.values.end());
    } else {
        out.values = loop_singular_values(std::get<MatrixLoop>(f), theta);
    }
    double mx = 0.0;
    for (double v : out.values) mx = std::max(mx, std::abs(v));
    out.kernel_threshold = default_kernel_threshold(mx);
    for (double v : out.values)
        if (std::abs(v) < out.kernel_threshold) ++out.kernel_dim;
    return out;
}

cplx fiber_zeta_bar(const Family& f, double theta, cplx s) {
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        bool ker = false;
        double fr = flux_fraction(fl->total(theta), &ker);
        cplx sum = ker ? 2.0 * hurwitz_zeta(s, 1.0) : hurwitz_zeta(s, fr) + hurwitz_zeta(s, 1.0 - fr);
        return gamma(0.5 * s) * sum + (ker ? 1.0 : 0.0);
    }
    const auto& ml = std::get<MatrixLoop>(f);
    std::vector<double> sv = loop_singular_values(ml, theta);
    double thr = default_kernel_threshold(sv.empty() ? 0.0 : sv.back());
    std::vector<cplx> terms;
    int ker = 0;
    for (double v : sv) {
        if (v < thr)
            ++ker;
        else
            terms.push_back(std::exp(-s * std::log(v)));
    }
    cplx g = terms.empty() ? cplx(0.0) : gamma(0.5 * s);
    return g * stable_sum(terms) + static_cast<double>(ker);
}

cplx fiber_eta_bar(const Family& f, double theta, cplx s) {
    cplx pref = rgamma(cplx(0.5)) * gamma(0.5 * (1.0 + s));
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        bool ker = false;
        double fr = flux_fraction(fl->total(theta), &ker);
        if (ker) return 1.0;  // spectrum Z: symmetric apart from the kernel
        return pref * (hurwitz_zeta(s, fr) - hurwitz_zeta(s, 1.0 - fr));
    }
    const auto& ml = std::get<MatrixLoop>(f);
    if (!ml.hermitian()) throw NotSelfAdjoint("fiber_eta_bar: matrix loop is not Hermitian");
    std::vector<double> ev = hermitian_eigenvalues(ml.at(theta));
    double mx = 0.0;
    for (double v : ev) mx = std::max(mx, std::abs(v));
    double thr = default_kernel_threshold(mx);
    std::vector<cplx> terms;
    int ker = 0;
    for (double v : ev) {
        if (std::abs(v) < thr)
            ++ker;
        else
            terms.push_back((v > 0 ? 1.0 : -1.0) * std::exp(-s * std::log(std::abs(v))));
    }
    return pref * stable_sum(terms) + static_cast<double>(ker);
}

double tr_zeta_abs(const Family& f, double theta) {
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        bool ker = false;
        double fr = flux_fraction(fl->total(theta), &ker);
        if (ker) throw KernelPresent("tr_zeta_abs: fiber operator has a kernel at theta = " + std::to_string(theta));
        return (hurwitz_zeta(-1.0, fr) + hurwitz_zeta(-1.0, 1.0 - fr)).real();
    }
    FiberSpectralData d = fiber_spectrum(f, theta, 1);
    if (d.kernel_dim > 0) throw KernelPresent("tr_zeta_abs: fiber operator has a kernel");
    double s = 0.0;
    for (double v : d.values) s += v;
    return s;
}

double tr_w_abs(const Family& f, double theta) {
    if (std::holds_alternative<MatrixLoop>(f)) return 0.0;
    const auto& fl = std::get<FluxFamily>(f);
    bool ker = false;
    double fr = flux_fraction(fl.total(theta), &ker);
    if (ker) throw KernelPresent("tr_w_abs: fiber operator has a kernel");
    auto fn = [fr](cplx s) { return hurwitz_zeta(s - 1.0, fr) + hurwitz_zeta(s - 1.0, 1.0 - fr); };
    LaurentExpansion le = laurent_coefficients(fn, 0.0, -1, 0);
    return le.coeff(-1).real();
}

// ---------------------------------------------------------------------------
// Stabilization

namespace {

double smoothstep5(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

double smoothstep5_prime(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 30.0 * x * x * (1.0 - x) * (1.0 - x);
}

// Low operator L(theta) and its derivative: the whole matrix for a loop, the diagonal
// window of fiber modes for a flux family.
struct LowOperator {
    int rows = 0;
    int cols = 0;
    std::function<CMatrix(double)> value;
    std::function<CMatrix(double)> derivative;
};

// Spectral data of L^*L at theta.
struct LowSpectrum {
    std::vector<double> sv;  // singular values, ascending
    CMatrix vectors;         // eigenvectors of L^*L, columns
};

LowSpectrum low_spectrum(const LowOperator& L, double theta) {
    CMatrix l = L.value(theta);
    EigenSystem es = hermitian_eigensystem(l.adjoint() * l);
    LowSpectrum out;
    out.sv.resize(es.values.size());
    for (std::size_t i = 0; i < es.values.size(); ++i) out.sv[i] = std::sqrt(std::max(es.values[i], 0.0));
    out.vectors = es.vectors;
    return out;
}

int rank_below(const std::vector<double>& sv, double level) {
    int r = 0;
    for (double v : sv)
        if (v < level) ++r;
    return r;
}

// True when no singular value lies in [level (1 - margin), level (1 + margin)].
bool level_clear(const std::vector<double>& sv, double level, double margin) {
    for (double v : sv)
        if (v >= level * (1.0 - margin) && v <= level * (1.0 + margin)) return false;
    return true;
}

CMatrix columns(const CMatrix& m, int first, int count) {
    CMatrix out(m.rows, count);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < count; ++j) out(i, j) = m(i, first + j);
    return out;
}

double min_sv(const CMatrix& a) {
    std::vector<double> s = singular_values(a);
    return s.empty() ? 0.0 : s.front();
}

struct Arc {
    double theta_begin = 0.0;  // start of rise
    double rise = 0.0;         // rise length
    double theta_end = 0.0;    // end of fall (theta_begin + total length)
    double fall = 0.0;         // fall length
    bool full = false;         // covers the whole circle, bump identically 1
    double level = 0.0;
    int rank = 0;
    CMatrix g;  // cols x rank, orthonormal basis of the low space at the arc start
    int offset = 0;  // first row of this arc's slot in U^-
};

// Bump value and derivative at theta for an arc.
std::pair<double, double> arc_bump(const Arc& a, double theta) {
    if (a.full) return {1.0, 0.0};
    double x = theta - a.theta_begin;
    x -= kTwoPi * std::floor(x / kTwoPi);
    double len = a.theta_end - a.theta_begin;
    if (x >= len) return {0.0, 0.0};
    double up = 1.0, dup = 0.0, down = 1.0, ddown = 0.0;
    if (a.rise > 0.0 && x < a.rise) {
        up = smoothstep5(x / a.rise);
        dup = smoothstep5_prime(x / a.rise) / a.rise;
    }
    if (a.fall > 0.0 && x > len - a.fall) {
        double y = (len - x) / a.fall;
        down = smoothstep5(y);
        ddown = -smoothstep5_prime(y) / a.fall;
    }
    return {up * down, dup * down + up * ddown};
}

// Projection onto the eigenvectors of L^*L below level^2, and its theta-derivative.
void low_projection(const LowOperator& L, double theta, double level, CMatrix& p, CMatrix* dp) {
    CMatrix l = L.value(theta);
    EigenSystem es = hermitian_eigensystem(l.adjoint() * l);
    const int n = L.cols;
    double lev2 = level * level;
    p = CMatrix(n, n);
    std::vector<int> lo, hi;
    for (int i = 0; i < n; ++i) (es.values[i] < lev2 ? lo : hi).push_back(i);
    for (int i : lo)
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) p(r, c) += es.vectors(r, i) * std::conj(es.vectors(c, i));
    if (!dp) return;
    CMatrix dl = L.derivative(theta);
    CMatrix dh = dl.adjoint() * l + l.adjoint() * dl;
    CMatrix hv = es.vectors.adjoint() * dh * es.vectors;  // H' in the eigenbasis
    CMatrix x(n, n);  // derivative in the eigenbasis
    for (int i : lo)
        for (int k : hi) {
            cplx c = hv(k, i) / (es.values[i] - es.values[k]);
            x(k, i) += c;
            x(i, k) += std::conj(c);
        }
    *dp = es.vectors * x * es.vectors.adjoint();
}

CMatrix random_frame(int rows, int cols, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    CMatrix g(rows, cols);
    for (cplx& z : g.data) z = cplx(nd(gen), nd(gen));
    return g;
}

struct Assembled {
    CMatrix du;
    CMatrix ddu;
};

}  // namespace

StabilizedFamily stabilize(const Family& f, const StabilizeOptions& opt) {
    const int N = opt.grid_points;
    if (N < 16) throw DomainError("stabilize: grid too coarse");
    StabilizedFamily out;
    out.base = f;
    out.grid_points = N;

    LowOperator L;
    double level_cap = std::numeric_limits<double>::infinity();
    if (auto* fl = std::get_if<FluxFamily>(&f)) {
        if (fl->winding != 0)
            throw CoverFailure(
                "stabilize: flux family with winding " + std::to_string(fl->winding) +
                " is not a periodic loop of operators on a fixed space; no finite-rank stabilization exists on S^1");
        bool crossing = false;
        for (int i = 0; i < N && !crossing; ++i) {
            double th = kTwoPi * i / N;
            double tot = fl->total(th);
            double dist = std::abs(tot - std::round(tot));
            if (dist <= 10.0 * default_kernel_threshold(std::abs(tot) + 1.0)) crossing = true;
        }
        // a sign change of a branch between grid points is a crossing as well
        for (int i = 0; i < N && !crossing; ++i) {
            double a0 = fl->total(kTwoPi * i / N), a1 = fl->total(kTwoPi * (i + 1) / N);
            if (std::floor(a0) != std::floor(a1)) crossing = true;
        }
        int kw = static_cast<int>(std::ceil(fl->max_abs_a() + 1.5));
        out.window_k_min = -kw;
        out.window_k_max = kw;
        // levels must stay below every fiber mode outside the window
        level_cap = (kw + 1.0 - fl->max_abs_a()) * (1.0 - opt.level_margin);
        const int w = 2 * kw + 1;
        FluxFamily fam = *fl;
        L.rows = L.cols = w;
        L.value = [fam, kw, w](double th) {
            CMatrix m(w, w);
            double a = fam.a(th);
            for (int i = 0; i < w; ++i) m(i, i) = (i - kw) + a;
            return m;
        };
        L.derivative = [fam, w](double th) {
            CMatrix m(w, w);
            double ap = fam.a_prime(th);
            for (int i = 0; i < w; ++i) m(i, i) = ap;
            return m;
        };
        if (!crossing) {
            out.d_u = L.value;
            out.d_u_prime = L.derivative;
            out.window = L.value;
            out.bump = [](double) { return 0.0; };
            return out;
        }
    } else {
        const auto& ml = std::get<MatrixLoop>(f);
        MatrixLoop loop = ml;
        L.rows = ml.rows;
        L.cols = ml.cols;
        L.value = [loop](double th) { return loop.at(th); };
        L.derivative = [loop](double th) { return loop.derivative(th); };
        if (ml.rows == ml.cols) {
            bool invertible = true;
            for (int i = 0; i < N && invertible; ++i) {
                double th = kTwoPi * i / N;
                LowSpectrum ls = low_spectrum(L, th);
                if (ls.sv.front() <= 10.0 * default_kernel_threshold(ls.sv.back())) invertible = false;
            }
            if (invertible) {
                out.d_u = L.value;
                out.d_u_prime = L.derivative;
                out.window = L.value;
                out.bump = [](double) { return 0.0; };
                return out;
            }
        }
    }

    // Spectral data on the grid.
    std::vector<LowSpectrum> spec(N);
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) { spec[i] = low_spectrum(L, kTwoPi * i / N); });

    // Candidate levels at a grid point: midpoints of the gaps of the singular values, plus
    // one level above the top so that the whole space is low.
    auto candidates = [&](int i) {
        const std::vector<double>& sv = spec[i].sv;
        std::vector<double> lv;
        double top = sv.back();
        for (std::size_t k = 0; k + 1 < sv.size(); ++k) {
            double lo = sv[k], hi = sv[k + 1];
            if (hi - lo > 2.0 * opt.level_margin * hi) lv.push_back(0.5 * (lo + hi) * (1.0 + opt.level_shift));
        }
        lv.push_back((top + 1.0) * (1.0 + opt.level_shift));
        std::vector<double> kept;
        for (double v : lv)
            if (v < level_cap) kept.push_back(v);
        return kept;
    };
    auto reach = [&](int start, double level, int rank, const CMatrix& g, int limit) {
        int len = 0;
        for (; len < limit; ++len) {
            int i = (start + len) % N;
            if (!level_clear(spec[i].sv, level, opt.level_margin)) break;
            if (rank_below(spec[i].sv, level) != rank) break;
            if (rank > 0 && rank < L.cols) {
                CMatrix v = columns(spec[i].vectors, 0, rank);
                if (min_sv(g.adjoint() * v) < 0.5) break;
            }
        }
        return len;
    };

    std::vector<Arc> arcs;
    std::vector<int> starts, lengths;
    int pos = 0;
    int ov_in = 0;  // overlap with the previous arc, in grid steps
    int guard = 0;
    while (true) {
        if (++guard > 4 * N) throw CoverFailure("stabilize: cover construction did not terminate");
        int best_len = -1;
        Arc best;
        for (double level : candidates(pos % N)) {
            int rank = rank_below(spec[pos % N].sv, level);
            if (rank == 0) continue;
            Arc a;
            a.level = level;
            a.rank = rank;
            a.g = columns(spec[pos % N].vectors, 0, rank);
            int len = reach(pos % N, level, rank, a.g, N + 1);
            if (opt.choice == StabilizeOptions::LevelChoice::Lowest && len >= ov_in + std::max(8, N / 32)) {
                best_len = len;
                best = a;
                break;
            }
            if (len > best_len) {
                best_len = len;
                best = a;
            }
        }
        if (best_len < ov_in + 4)
            throw CoverFailure("stabilize: no admissible level near theta = " + std::to_string(kTwoPi * pos / N) +
                               " at grid resolution " + std::to_string(N));
        arcs.push_back(best);
        starts.push_back(pos);
        lengths.push_back(best_len);
        if (arcs.size() == 1 && best_len > N) {
            arcs[0].full = true;
            break;
        }
        if (pos + best_len >= N + 2) break;  // wraps past the start of the first arc
        // the outgoing transition must not reach into the incoming one
        int ov = std::max(2, static_cast<int>(opt.overlap_fraction * best_len));
        ov = std::min(ov, best_len - ov_in - 2);
        pos = pos + best_len - ov;
        ov_in = ov;
    }

    // Geometry of the arcs in theta; transitions live on the overlaps of consecutive arcs.
    const double h = kTwoPi / N;
    const int na = static_cast<int>(arcs.size());
    if (!arcs[0].full) {
        if (na == 1) throw CoverFailure("stabilize: single arc does not close up");
        for (int j = 0; j < na; ++j) {
            Arc& a = arcs[j];
            a.theta_begin = h * starts[j];
            a.theta_end = h * (starts[j] + lengths[j] - 1);
        }
        // wrap overlap between the last arc and the first, limited by the first arc's own transition
        double last_end = arcs[na - 1].theta_end;
        double first_next = arcs[1 % na].theta_begin;
        double wrap_end = std::min(last_end - kTwoPi, 0.5 * first_next);
        if (wrap_end <= 0.0) throw CoverFailure("stabilize: last arc does not overlap the first");
        arcs[na - 1].theta_end = kTwoPi + wrap_end;
        arcs[0].rise = wrap_end;
        arcs[na - 1].fall = wrap_end;
        for (int j = 0; j + 1 < na; ++j) {
            double ov = arcs[j].theta_end - arcs[j + 1].theta_begin;
            if (ov <= 0.0) throw CoverFailure("stabilize: consecutive arcs do not overlap");
            arcs[j].fall = ov;
            arcs[j + 1].rise = ov;
        }
    }
    int r_total = 0;
    for (Arc& a : arcs) {
        a.offset = r_total;
        r_total += a.rank;
    }
    const int m = L.rows, n = L.cols;
    const int u_plus = m + r_total - n;
    if (u_plus < 0) throw CoverFailure("stabilize: stacked operator cannot be injective");
    out.u_minus_dim = r_total;
    out.u_plus_dim = u_plus;
    out.overlap = opt.overlap_fraction;
    for (int j = 0; j < na; ++j) {
        CoverArc ca;
        ca.begin = starts[j];
        ca.length = lengths[j];
        ca.level = arcs[j].level;
        ca.rank = arcs[j].rank;
        out.cover.push_back(ca);
    }

    auto build = [L, arcs, m, n, r_total, u_plus](const CMatrix& frame, double th, bool want_derivative) {
        CMatrix l = L.value(th);
        CMatrix dl = want_derivative ? L.derivative(th) : CMatrix();
        CMatrix d21(r_total, n), dd21(r_total, n);
        for (const Arc& a : arcs) {
            auto [phi, dphi] = arc_bump(a, th);
            if (phi == 0.0 && dphi == 0.0) continue;
            CMatrix p, dp;
            low_projection(L, th, a.level, p, want_derivative ? &dp : nullptr);
            CMatrix gp = a.g.adjoint() * p;
            CMatrix gdp = want_derivative ? a.g.adjoint() * dp : CMatrix();
            for (int r = 0; r < a.rank; ++r)
                for (int c = 0; c < n; ++c) {
                    d21(a.offset + r, c) += phi * gp(r, c);
                    if (want_derivative) dd21(a.offset + r, c) += dphi * gp(r, c) + phi * gdp(r, c);
                }
        }
        const int rows = m + r_total;
        CMatrix b(rows, n), db(rows, n);
        for (int i = 0; i < m; ++i)
            for (int c = 0; c < n; ++c) {
                b(i, c) = l(i, c);
                if (want_derivative) db(i, c) = dl(i, c);
            }
        for (int i = 0; i < r_total; ++i)
            for (int c = 0; c < n; ++c) {
                b(m + i, c) = d21(i, c);
                if (want_derivative) db(m + i, c) = dd21(i, c);
            }
        // Pi = B (B^*B)^{-1} B^*, W = (I - Pi) G
        CMatrix bplus = inverse(b.adjoint() * b) * b.adjoint();
        CMatrix pi = b * bplus;
        CMatrix q = CMatrix::identity(rows) - pi;
        CMatrix w = q * frame;
        Assembled as;
        as.du = CMatrix(rows, rows);
        for (int i = 0; i < rows; ++i) {
            for (int c = 0; c < n; ++c) as.du(i, c) = b(i, c);
            for (int c = 0; c < u_plus; ++c) as.du(i, n + c) = w(i, c);
        }
        if (want_derivative) {
            CMatrix x = q * db * bplus;
            CMatrix dpi = x + x.adjoint();
            CMatrix dw = (-1.0) * (dpi * frame);
            as.ddu = CMatrix(rows, rows);
            for (int i = 0; i < rows; ++i) {
                for (int c = 0; c < n; ++c) as.ddu(i, c) = db(i, c);
                for (int c = 0; c < u_plus; ++c) as.ddu(i, n + c) = dw(i, c);
            }
        }
        return as;
    };

    // Frame for the cokernel: best of a few seeded draws, judged by min singular value of D_U.
    CMatrix frame;
    double best_min = -1.0;
    for (unsigned attempt = 0; attempt < 16; ++attempt) {
        CMatrix g = random_frame(m + r_total, u_plus, opt.seed + 7919u * attempt);
        std::vector<double> mins(N);
        parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
            mins[i] = u_plus + n == 0 ? 1.0 : min_sv(build(g, kTwoPi * i / N, false).du);
        });
        double mn = *std::min_element(mins.begin(), mins.end());
        if (mn > best_min) {
            best_min = mn;
            frame = g;
        }
    }
    double scale = 1.0;
    for (int i = 0; i < N; i += std::max(1, N / 16)) scale = std::max(scale, build(frame, kTwoPi * i / N, false).du.max_abs());
    if (!(best_min > 10.0 * default_kernel_threshold(scale) && best_min > 1e-6)) best_min = -1.0;
    if (best_min < 0.0) throw CoverFailure("stabilize: assembled D_U is not invertible on the grid");

    for (const Arc& a : arcs) {
        if (a.full) continue;
        for (double b : {a.theta_begin, a.theta_begin + a.rise, a.theta_end - a.fall, a.theta_end})
            out.breakpoints.push_back(b - kTwoPi * std::floor(b / kTwoPi));
    }
    std::sort(out.breakpoints.begin(), out.breakpoints.end());
    out.breakpoints.erase(std::unique(out.breakpoints.begin(), out.breakpoints.end(),
                                      [](double x, double y) { return std::abs(x - y) < 1e-12; }),
                          out.breakpoints.end());

    out.d_u = [build, frame](double th) { return build(frame, th, false).du; };
    out.d_u_prime = [build, frame](double th) { return build(frame, th, true).ddu; };
    out.window = L.value;
    out.bump = [arcs](double th) {
        double s = 0.0;
        for (const Arc& a : arcs) s += arc_bump(a, th).first;
        return s;
    };
    return out;
}

double min_singular_value(const StabilizedFamily& sf) {
    std::vector<double> mins(sf.grid_points);
    parallel_for(static_cast<std::size_t>(sf.grid_points), [&](std::size_t i) {
        mins[i] = min_sv(sf.d_u(kTwoPi * i / sf.grid_points));
    });
    return *std::min_element(mins.begin(), mins.end());
}

}  // namespace adlim
