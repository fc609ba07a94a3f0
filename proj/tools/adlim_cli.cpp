// adlim: command-line front end for the adiabatic-limit library.
//
// Exit codes: 0 pass, 1 acceptance or numerical failure, 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adlim/detbundle.hpp"
#include "adlim/errors.hpp"
#include "adlim/lab.hpp"

namespace fs = std::filesystem;
using namespace adlim;

namespace {

struct Options {
    std::string family;
    std::string s = "0";
    std::string t;
    int K = 0;
    int M = 0;
    int grid = 1024;
    std::string out;
    int threads = 0;
    std::string only;
    double tolerance_scale = 1.0;
    std::string experiment;
    std::string family_dir;
    double window = 8.0;
};

cplx parse_s(const std::string& text) {
    // "4", "2.5", "2+1i", "2-0.5i"
    std::string x = text;
    x.erase(std::remove(x.begin(), x.end(), ' '), x.end());
    try {
        if (!x.empty() && x.back() == 'i') {
            std::size_t cut = x.find_last_of("+-", x.size() - 2);
            if (cut == std::string::npos || cut == 0) return {0.0, std::stod(x.substr(0, x.size() - 1))};
            return {std::stod(x.substr(0, cut)), std::stod(x.substr(cut, x.size() - 1 - cut))};
        }
        std::size_t used = 0;
        double v = std::stod(x, &used);
        if (used != x.size()) throw std::invalid_argument(x);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("--s: cannot parse '" + text + "'");
    }
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": cannot parse '" + item + "'");
        }
    }
    return out;
}

std::vector<double> t_values(const Options& o, bool required) {
    if (o.t.empty()) {
        if (required) throw ConfigError("--t is required");
        return {};
    }
    std::vector<double> t = parse_list(o.t, "--t");
    for (double x : t)
        if (!(x > 0.0)) throw ConfigError("--t: values must be positive");
    std::sort(t.begin(), t.end(), std::greater<>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

Family family(const Options& o) {
    if (o.family.empty()) throw ConfigError("--family is required");
    return load_family(o.family);
}

ToleranceTable tolerances(const Options& o) { return default_tolerances().scaled(o.tolerance_scale); }

void emit(const Options& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out);
    if (!f) throw ConfigError("cannot write " + o.out);
    f << text;
}

bool wants_json(const Options& o) { return o.out.size() >= 5 && o.out.substr(o.out.size() - 5) == ".json"; }

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// CSV columns: t,K,M,s_re,s_im,value_re,value_im,error,method
int cmd_spectral_function(const Options& o, SpectralFunction which) {
    Family f = family(o);
    cplx s = parse_s(o.s);
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream csv;
    csv << "t,K,M,s_re,s_im,value_re,value_im,error,method\n";
    for (double t : t_values(o, true)) {
        Truncation tr = heuristic_truncation(f, t, o.window);
        if (o.K > 0) tr.K = o.K;
        if (o.M > 0) tr.M = o.M;
        TotalSpectrum sp = spectrum(assemble_delta_t(f, t, tr.K, tr.M));
        double eff = std::min(tr.window, 0.9 * t * tr.M);
        auto tail = make_tail(f, t, tr.K, SmoothCutoff::for_window(eff, 0.75));
        auto alt_tail = make_tail(f, t, tr.K, SmoothCutoff::for_window(eff, 0.65));
        SpectralInput in = make_input(sp, *tail), alt = make_input(sp, *alt_tail);
        cplx value;
        double error;
        std::string method;
        if (s.real() >= kConvergentRegion) {
            Regularized r = which == SpectralFunction::Zeta ? zeta_bar_direct(in, *tail, s, &alt, alt_tail.get())
                                                            : eta_bar_direct(in, *tail, s, &alt, alt_tail.get());
            value = r.value;
            error = r.error;
            method = "direct+tail";
        } else {
            ContinuationResult c = continue_to(in, *tail, which, s);
            value = std::abs(s) == 0.0 ? cplx(c.regularized) : c.laurent.coeff(0);
            error = c.error;
            method = c.method;
        }
        csv << num(t) << ',' << tr.K << ',' << tr.M << ',' << num(s.real()) << ',' << num(s.imag()) << ','
            << num(value.real()) << ',' << num(value.imag()) << ',' << num(error) << ',' << method << '\n';
        rows.push_back({{"t", t},
                        {"K", tr.K},
                        {"M", tr.M},
                        {"s", {s.real(), s.imag()}},
                        {"value", {value.real(), value.imag()}},
                        {"error", error},
                        {"method", method}});
    }
    if (wants_json(o)) {
        nlohmann::json j{{"family", family_name(f)},
                         {"family_hash", family_hash(f)},
                         {"function", which == SpectralFunction::Zeta ? "zeta_bar" : "eta_bar"},
                         {"rows", rows}};
        emit(o, j.dump(2) + "\n");
    } else {
        emit(o, csv.str());
    }
    return 0;
}

int cmd_holonomy(const Options& o) {
    Family f = family(o);
    if (o.grid < 8) throw ConfigError("--grid must be at least 8");
    cplx h, coarse;
    int index = 0;
    bool stabilized = false;
    try {
        h = holonomy(f, o.grid);
        coarse = holonomy(f, o.grid / 2);
    } catch (const NotInvertible&) {
        StabilizedFamily sf = stabilize(f);
        h = holonomy(sf, o.grid);
        coarse = holonomy(sf, o.grid / 2);
        index = sf.index();
        stabilized = true;
    }
    nlohmann::json j{{"family", family_name(f)},
                     {"family_hash", family_hash(f)},
                     {"holonomy", {h.real(), h.imag()}},
                     {"error", std::abs(h - coarse)},
                     {"index", index},
                     {"stabilized", stabilized},
                     {"grid", o.grid},
                     {"provenance", stabilized ? "exp(-oint A(0)) of the stabilized family D_U, piecewise Gauss-Legendre"
                                               : "exp(-oint A(0)), periodic trapezoid; error is the grid-halving change"}};
    emit(o, j.dump(2) + "\n");
    return 0;
}

int cmd_spectral_flow(const Options& o) {
    Family f = family(o);
    auto* fl = std::get_if<FluxFamily>(&f);
    if (!fl) throw ConfigError("spectral-flow: needs a flux family");
    SpectralFlowRecord r = spectral_flow(*fl, o.grid);
    double res = index_via_residue(*fl, 256);
    std::cout << r.total << "\n";
    if (!o.out.empty()) {
        nlohmann::json j = nlohmann::json::parse(to_json(r));
        j["family"] = family_name(f);
        j["index_via_residue"] = res;
        j["index_via_residue_error"] = std::abs(res - r.total);
        j["provenance"] = "signed zero crossings of k + a(theta) + c theta/2pi; residue 1-form integral";
        std::ofstream(o.out) << j.dump(2) << "\n";
    }
    return 0;
}

void write_report(const fs::path& dir, const LimitReport& r, const std::string& stem) {
    fs::create_directories(dir);
    std::ofstream(dir / (stem + ".json")) << to_json(r) << "\n";
    std::ofstream(dir / (stem + ".csv")) << to_csv(r);
    std::ofstream(dir / (stem + ".txt")) << to_text(r);
}

int cmd_limit_sweep(const Options& o) {
    SweepOptions sw;
    sw.t_grid = t_values(o, false);
    sw.window = o.window;
    sw.theta_grid = o.grid;
    sw.tol = tolerances(o);
    if (o.M > 0) sw.fixed_M = o.M;
    const std::string& e = o.experiment;
    LimitReport r;
    if (e == "closing-identity") {
        r = run_closing_identity(parse_s(o.s).real(), sw);
    } else if (e == "log-counterexample") {
        r = run_log_counterexample(0.3, sw);
    } else {
        Family f = family(o);
        if (e == "mz")
            r = run_theorem_mz(f, parse_s(o.s).real(), sw);
        else if (e == "eil")
            r = run_theorem_eil(f, parse_s(o.s).real(), sw);
        else if (e == "pzl")
            r = run_corollary_pzl(f, sw);
        else if (e == "holonomy")
            r = run_holonomy(f, sw);
        else if (e == "spectral-flow") {
            auto* fl = std::get_if<FluxFamily>(&f);
            if (!fl) throw ConfigError("spectral-flow: needs a flux family");
            r = run_spectral_flow(*fl, sw);
        } else
            throw ConfigError("--experiment: unknown '" + e + "'");
    }
    std::cout << to_text(r);
    if (!o.out.empty()) write_report(o.out, r, r.id);
    return r.pass ? 0 : 1;
}

int cmd_verify(const Options& o) {
    SuiteOptions so;
    so.family_dir = o.family_dir;
    so.theta_grid = o.grid;
    so.tol = tolerances(o);
    std::vector<int> ids;
    if (o.only.empty()) {
        for (std::size_t i = 0; i < criterion_keys().size(); ++i) ids.push_back(static_cast<int>(i) + 1);
    } else {
        std::stringstream ss(o.only);
        std::string item;
        while (std::getline(ss, item, ',')) {
            int id = criterion_id(item);
            if (id == 0) throw ConfigError("--only: unknown criterion '" + item + "'");
            ids.push_back(id);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
    bool all = true;
    std::vector<std::string> failed;
    for (int id : ids) {
        CriterionResult c;
        try {
            c = run_criterion(id, so);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            c.id = id;
            c.key = criterion_keys()[id - 1];
            c.summary = std::string("error: ") + e.what();
        }
        std::printf("criterion %d %-18s %s  [%.1f s]  %s\n", c.id, c.key.c_str(), c.pass ? "PASS" : "FAIL", c.seconds,
                    c.summary.c_str());
        std::fflush(stdout);
        if (!c.pass) failed.push_back(c.key);
        all = all && c.pass;
        if (!o.out.empty())
            for (std::size_t i = 0; i < c.reports.size(); ++i)
                write_report(fs::path(o.out) / c.key, c.reports[i], std::to_string(i) + "_" + c.reports[i].id);
    }
    if (!failed.empty()) {
        std::printf("failing:");
        for (auto& k : failed) std::printf(" %s", k.c_str());
        std::printf("\n");
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adlim: adiabatic limits of eta, zeta and determinants over the circle"};
    app.require_subcommand(1);
    // TOML/INI run configuration with the same keys as the flags, e.g. [zeta] s = "4"
    app.set_config("--config", "", "run configuration file; unknown keys are rejected");
    app.allow_config_extras(CLI::config_extras_mode::error);
    Options o;
    app.add_option("--threads", o.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--tolerance-scale", o.tolerance_scale, "multiply every verdict tolerance")->check(CLI::PositiveNumber);

    auto common = [&](CLI::App* c) {
        c->add_option("--family", o.family, "family JSON file");
        c->add_option("--s", o.s, "spectral parameter, e.g. 4 or 2+1i");
        c->add_option("--t", o.t, "comma-separated adiabatic parameters");
        c->add_option("--K", o.K, "fiber cutoff override")->check(CLI::NonNegativeNumber);
        c->add_option("--M", o.M, "base cutoff override")->check(CLI::NonNegativeNumber);
        c->add_option("--grid", o.grid, "theta grid");
        c->add_option("--out", o.out, "output file or directory");
        c->add_option("--window", o.window, "energy window");
    };
    CLI::App* zeta = app.add_subcommand("zeta", "zeta bar of delta_t; CSV t,K,M,s_re,s_im,value_re,value_im,error,method");
    CLI::App* eta = app.add_subcommand("eta", "eta bar of delta_t; same columns as zeta");
    CLI::App* hol = app.add_subcommand("holonomy", "holonomy of the determinant line (JSON)");
    CLI::App* flow = app.add_subcommand("spectral-flow", "spectral flow of a flux family");
    CLI::App* sweep = app.add_subcommand("limit-sweep", "t -> 0 sweep of one experiment; --out DIR writes JSON, text and CSV t,value,error");
    CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite");
    for (CLI::App* c : {zeta, eta, hol, flow, sweep}) common(c);
    sweep->add_option("--experiment", o.experiment,
                      "mz, eil, pzl, holonomy, spectral-flow, closing-identity, log-counterexample")
        ->required();
    verify->add_option("--only", o.only, "comma-separated criteria (numbers or names)");
    verify->add_option("--out", o.out, "directory for the reports");
    verify->add_option("--grid", o.grid, "theta grid");
    verify->add_option("--family-dir", o.family_dir, "directory of the shipped family files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    set_thread_count(o.threads);
    try {
        if (*zeta) return cmd_spectral_function(o, SpectralFunction::Zeta);
        if (*eta) return cmd_spectral_function(o, SpectralFunction::Eta);
        if (*hol) return cmd_holonomy(o);
        if (*flow) return cmd_spectral_flow(o);
        if (*sweep) return cmd_limit_sweep(o);
        if (*verify) return cmd_verify(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    }
    return 2;
}
