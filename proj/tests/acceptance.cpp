// Acceptance harness: runs the ten release gates end to end against the
// forward solver's own output, prints one PASS/FAIL line per gate with the
// measured numbers and the pinned tolerance, and exits nonzero if any gate
// fails. Every tolerance is fixed here, in code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "nodal/asymptotics.hpp"
#include "nodal/cli.hpp"
#include "nodal/forward.hpp"
#include "nodal/inverse.hpp"

using namespace nodal;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void report(int idx, const char* name, bool pass, const std::string& detail) {
    std::printf("[%2d] %-28s %s  %s\n", idx, name, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

const std::vector<double> kThetas{PI / 6, PI / 3, PI / 2, 3 * PI / 4};

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "nodal_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

double meta_value(const cli::MetaEntries& entries, const std::string& key) {
    for (const auto& [k, v] : entries)
        if (k == key) return std::strtod(v.c_str(), nullptr);
    return std::nan("");
}

std::string slurp(const fs::path& p) {
    std::string body;
    if (FILE* f = std::fopen(p.c_str(), "rb")) {
        char buf[4096];
        size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) body.append(buf, got);
        std::fclose(f);
    }
    return body;
}

// Least-squares slope of log(err) against log(n).
double loglog_slope(const std::vector<std::pair<int, double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, v] : pts) {
        const double lx = std::log(static_cast<double>(n)), ly = std::log(v);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double m = static_cast<double>(pts.size());
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ---- 1: closed-form spectrum ----------------------------------------------
// Unloaded problem at four angles: lambda_n matches n + 1/2 + theta/pi.
void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool complete = true;
    for (double theta : kThetas) {
        const auto prob = fixtures::zero_problem(theta, 4000);
        const auto spec = forward::eigenvalues(prob, 1, 50, 1e-11);
        complete = complete && spec.missing.empty() && spec.entries.size() == 50;
        for (const auto& e : spec.entries)
            worst = std::max(worst, std::abs(e.lambda - (e.n + 0.5 + theta / PI)));
    }
    const double secs = seconds_since(t0);
    const bool pass = complete && worst <= 1e-8 && secs <= 30.0;
    report(1, "closed-form spectrum", pass,
           "max |lambda_n - (n + 1/2 + theta/pi)| = " + num(worst) +
               " over 4 angles, n = 1..50 (tol 1e-8, " + num(secs) + " s)");
}

// ---- 2: closed-form nodes ---------------------------------------------------
// Unloaded nodes land on ((j + 1/2) pi + theta) / lambda_n.
void criterion2() {
    double worst_pi2 = 0.0, worst_any = 0.0;
    bool counts = true;
    {
        const auto prob = fixtures::zero_problem(PI / 2, 4000);
        forward::ForwardSolver solver(prob);
        const auto acfg = asym::make_config(prob);
        const double lam = forward::refine_eigenvalue(solver, asym::lambda_asym(acfg, 3),
                                                      1e-11, 0.35);
        const auto nl = forward::nodes_with_solver(solver, lam, 3, 1e-13);
        counts = counts && nl.count_matches;
        const double expect[3] = {PI / 4, PI / 2, 3 * PI / 4};
        for (size_t j = 0; j < nl.nodes.size() && j < 3; ++j)
            worst_pi2 = std::max(worst_pi2, std::abs(nl.nodes[j] - expect[j]));
    }
    // General angles: the computed node list must coincide elementwise with
    // the closed-form zero set {((j + 1/2) pi + theta) / lambda_n} inside
    // (0, pi), over every integer j that lands there (for theta > pi/2 the
    // j = -1 zero enters the interval, so the lattice has n + 1 points).
    bool sets_match = true;
    for (double theta : kThetas) {
        const auto prob = fixtures::zero_problem(theta, 4000);
        const auto spec = forward::eigenvalues(prob, 1, 40, 1e-11);
        counts = counts && spec.missing.empty();
        forward::ForwardSolver solver(prob);
        for (const auto& e : spec.entries) {
            // Boundary margin 1e-8 (the criterion tolerance): the computed
            // lambda_n carries the bisection tolerance, which would otherwise
            // push the j = n lattice point (exactly pi) just inside.
            std::vector<double> lattice;
            for (int j = -2; j <= e.n + 1; ++j) {
                const double x = ((j + 0.5) * PI + theta) / e.lambda;
                if (x > 1e-8 && x < PI - 1e-8) lattice.push_back(x);
            }
            const auto nl = forward::nodes_with_solver(solver, e.lambda, e.n, 1e-13);
            if (nl.nodes.size() != lattice.size()) {
                sets_match = false;
                continue;
            }
            for (size_t k = 0; k < lattice.size(); ++k)
                worst_any = std::max(worst_any, std::abs(nl.nodes[k] - lattice[k]));
        }
    }
    const bool pass = counts && sets_match && worst_pi2 <= 1e-8 && worst_any <= 1e-8;
    report(2, "closed-form nodes", pass,
           "theta = pi/2, n = 3 lattice err = " + num(worst_pi2) + "; zero-set err = " +
               num(worst_any) + " over 4 angles, n <= 40" +
               (sets_match ? "" : "; COUNT MISMATCH vs analytic zero set") +
               " (tol 1e-8)");
}

// ---- 3: trajectory self-consistency ----------------------------------------
// Residuals of the integrated system at lambda = 5 on the loaded fixture, and
// their second-order shrink when the grid doubles.
void criterion3() {
    const auto p4 = fixtures::p1_problem(4000);
    const auto r4 = forward::volterra_residual(p4, forward::integrate(p4, 5.0));
    const auto p8 = fixtures::p1_problem(8000);
    const auto r8 = forward::volterra_residual(p8, forward::integrate(p8, 5.0));
    const double ratio1 = r4.first / r8.first;
    const double ratio2 = r4.second / r8.second;
    const bool pass = r4.first <= 5e-5 && r4.second <= 5e-5 && ratio1 >= 3.4 &&
                      ratio1 <= 4.6 && ratio2 >= 3.4 && ratio2 <= 4.6;
    report(3, "trajectory residuals", pass,
           "residuals = (" + num(r4.first) + ", " + num(r4.second) +
               ") at N = 4000 (tol 5e-5); N-doubling ratios = (" + num(ratio1) + ", " +
               num(ratio2) + ") (window [3.4, 4.6])");
}

// ---- 4: eigenvalue correction decay -----------------------------------------
// n * |lambda_fwd - lambda_series| should fall as n grows if the remainder is
// o(1/n).
void criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto prob = fixtures::p1_problem(4000);
    const auto acfg = asym::make_config(prob);
    forward::ForwardSolver solver(prob);
    std::vector<double> seq;
    std::string shown;
    for (int n : {10, 20, 40, 80}) {
        const double guess = asym::lambda_asym(acfg, n);
        const double lam = forward::refine_eigenvalue(solver, guess, 1e-11, 0.35);
        seq.push_back(n * std::abs(lam - guess));
        if (!shown.empty()) shown += ", ";
        shown += num(seq.back());
    }
    bool decreasing = true;
    for (size_t i = 1; i < seq.size(); ++i) decreasing = decreasing && seq[i] < seq[i - 1];
    const double secs = seconds_since(t0);
    const bool pass = decreasing && secs <= 60.0;
    report(4, "eigenvalue correction decay", pass,
           "n * |lambda_fwd - lambda_series| = {" + shown +
               "} over n = {10, 20, 40, 80}; expected decreasing (" + num(secs) + " s)");
}

// ---- 5: node-count threshold -------------------------------------------------
// Exactly n interior sign changes from a small threshold on, stable when the
// grid doubles.
void criterion5() {
    auto threshold = [](const model::Problem& prob, int horizon) {
        const auto acfg = asym::make_config(prob);
        forward::ForwardSolver solver(prob);
        std::vector<bool> ok(static_cast<size_t>(horizon) + 1, false);
        for (int n = 1; n <= horizon; ++n) {
            try {
                const double lam = forward::refine_eigenvalue(
                    solver, asym::lambda_asym(acfg, n), 1e-11, 0.35);
                ok[static_cast<size_t>(n)] =
                    forward::nodes_with_solver(solver, lam, n, 1e-13).count_matches;
            } catch (const NoSignChange&) {
            }
        }
        int n0 = horizon + 1;
        for (int m = horizon; m >= 1 && ok[static_cast<size_t>(m)]; --m) n0 = m;
        return n0;
    };
    const int horizon = 12;
    const int zero_a = threshold(fixtures::zero_problem(PI / 3, 4000), horizon);
    const int zero_b = threshold(fixtures::zero_problem(PI / 3, 8000), horizon);
    const int load_a = threshold(fixtures::p1_problem(4000), horizon);
    const int load_b = threshold(fixtures::p1_problem(8000), horizon);
    const bool pass = zero_a <= 5 && load_a <= 5 && zero_a == zero_b && load_a == load_b;
    report(5, "node-count threshold", pass,
           "N0(unloaded) = " + std::to_string(zero_a) + " -> " + std::to_string(zero_b) +
               " and N0(loaded) = " + std::to_string(load_a) + " -> " +
               std::to_string(load_b) + " under N doubling (bound 5, horizon " +
               std::to_string(horizon) + ")");
}

// ---- 6: nodal series decay ----------------------------------------------------
// Log-log slope of the node sup error against the closed-form series.
void criterion6() {
    const auto prob = fixtures::p1_problem(4000);
    const auto acfg = asym::make_config(prob);
    forward::ForwardSolver solver(prob);
    std::vector<std::pair<int, double>> pts;
    std::string shown;
    for (int n : {20, 40, 80}) {
        const double lam =
            forward::refine_eigenvalue(solver, asym::lambda_asym(acfg, n), 1e-11, 0.35);
        const auto nl = forward::nodes_with_solver(solver, lam, n, 1e-13);
        double sup = 0.0;
        for (size_t j = 0; j < nl.nodes.size(); ++j)
            sup = std::max(sup,
                           std::abs(nl.nodes[j] - asym::node_asym(acfg, n, static_cast<int>(j))));
        pts.emplace_back(n, sup);
        if (!shown.empty()) shown += ", ";
        shown += num(sup);
    }
    const double slope = loglog_slope(pts);
    const bool pass = slope >= -4.0 && slope <= -2.5;
    report(6, "nodal series decay", pass,
           "sup errors = {" + shown + "} at n = {20, 40, 80}; log-log slope = " + num(slope) +
               " (window [-4, -2.5])");
}

// ---- 7: round-trip reconstruction ---------------------------------------------
// Forward nodes at n = {50, 100, 200, 400} on the loaded fixture, L known;
// the reconstruction must land on the generating coefficients.
void criterion7(const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    cli::RunConfig cfg;
    cfg.problem = fixtures::p1_problem(4000);
    cfg.grid_n = 4000;
    cli::RunFlags flags;
    flags.out_dir = out;
    bool ran = true;
    try {
        ran = cli::run_roundtrip(cfg, flags) == cli::kExitOk;
    } catch (const std::exception& e) {
        report(7, "round-trip reconstruction", false, std::string("runner threw: ") + e.what());
        return;
    }
    const auto meta = cli::read_meta(out / "roundtrip.meta");
    const double theta_err = meta_value(meta, "theta_err");
    const double omega_err = meta_value(meta, "omega_pi_err");
    const double mu_err = meta_value(meta, "mu_err");
    const double p_err = meta_value(meta, "p_err");
    const double r_err = meta_value(meta, "r_err");
    const double secs = seconds_since(t0);
    auto gate = [](double err, double tol) { return std::isfinite(err) && err <= tol; };
    const bool pass = ran && gate(theta_err, 5e-3) && gate(omega_err, 5e-2) &&
                      gate(mu_err, 1e-2) && gate(p_err, 1e-1) && gate(r_err, 1e-1) &&
                      secs <= 300.0;
    report(7, "round-trip reconstruction", pass,
           "theta " + num(theta_err) + "/5e-3, omega_pi " + num(omega_err) + "/5e-2, mu " +
               num(mu_err) + "/1e-2, p " + num(p_err) + "/1e-1, r " + num(r_err) +
               "/1e-1 (sup over [0.2, pi - 0.2], " + num(secs) + " s)");
}

// ---- 8: divergence of the printed constants -------------------------------------
// On the unloaded problem at theta = pi/2 the corrected step formulas sit at
// zero while the printed variants are pushed off by fixed constants.
void criterion8(const fs::path& out) {
    cli::RunConfig cfg;
    cfg.problem = fixtures::zero_problem(PI / 2, 1000);
    cfg.grid_n = 1000;
    cfg.spectrum.n_min = 10;
    cfg.spectrum.n_max = 20;
    cli::RunFlags flags;
    flags.out_dir = out;
    bool ran = true;
    try {
        ran = cli::run_check(cfg, flags) == cli::kExitOk;
    } catch (const std::exception& e) {
        report(8, "printed-constant divergence", false,
               std::string("runner threw: ") + e.what());
        return;
    }
    std::map<std::string, double> typo;
    for (const auto& row : cli::read_report_csv(out / "asym_report.csv"))
        if (row.section == "typo") typo[row.name] = row.value;
    const double mp_der = typo.count("mu_prime_derived_err") ? typo["mu_prime_derived_err"]
                                                             : std::nan("");
    const double mp_pr = typo.count("mu_prime_printed_err") ? typo["mu_prime_printed_err"]
                                                            : std::nan("");
    const double om_der = typo.count("omega_pi_derived_err") ? typo["omega_pi_derived_err"]
                                                             : std::nan("");
    const double om_pr = typo.count("omega_pi_printed_err") ? typo["omega_pi_printed_err"]
                                                            : std::nan("");
    const double mp_offset = 2.0 * PI - 2.0;
    const bool pass = ran && mp_der <= 5e-2 && std::abs(mp_pr - mp_offset) <= 5e-2 &&
                      om_der <= 5e-2 && om_pr >= 0.5;
    report(8, "printed-constant divergence", pass,
           "mu' derived " + num(mp_der) + " vs printed " + num(mp_pr) + " (expect 2pi-2 = " +
               num(mp_offset) + " +- 5e-2); omega(pi) derived " + num(om_der) +
               " vs printed " + num(om_pr) + " (expect nonzero)");
}

// ---- 9: first-limit endpoint gate -------------------------------------------------
// f_hat(pi) + pi/2 vanishes whenever the phase integral closes at pi, and is
// supposed to flag fixtures whose phase integral does not close.
void criterion9(const fs::path& p1_dir, const fs::path& out_zero, const fs::path& out_counter) {
    double zero_resid = std::nan(""), p1_resid = std::nan(""), counter_resid = std::nan("");
    bool ran = true;
    try {
        cli::RunConfig zcfg;
        zcfg.problem = fixtures::zero_problem(PI / 2, 1000);
        zcfg.grid_n = 1000;
        cli::RunFlags zflags;
        zflags.out_dir = out_zero;
        ran = cli::run_roundtrip(zcfg, zflags) == cli::kExitOk && ran;
        zero_resid =
            std::abs(meta_value(cli::read_meta(out_zero / "reconstruction.meta"),
                                "f_pi_residual"));

        p1_resid = std::abs(meta_value(cli::read_meta(p1_dir / "reconstruction.meta"),
                                       "f_pi_residual"));

        cli::RunConfig ccfg;
        ccfg.problem.theta = PI / 3;
        ccfg.problem.p = model::FunctionSpec::expression("0.2", expr::Arity::univariate);
        ccfg.problem.r = model::FunctionSpec::expression("0.2", expr::Arity::univariate);
        ccfg.problem.m11 = model::FunctionSpec::expression("0", expr::Arity::bivariate);
        ccfg.problem.m12 = model::FunctionSpec::expression("0", expr::Arity::bivariate);
        ccfg.problem.m21 = model::FunctionSpec::expression("0", expr::Arity::bivariate);
        ccfg.problem.m22 = model::FunctionSpec::expression("0", expr::Arity::bivariate);
        ccfg.problem.omega = model::FunctionSpec::expression("0", expr::Arity::univariate);
        ccfg.grid_n = 2000;
        ccfg.problem.grid = Grid(ccfg.grid_n);
        model::validate_problem(ccfg.problem);
        cli::RunFlags cflags;
        cflags.out_dir = out_counter;
        ran = cli::run_roundtrip(ccfg, cflags) == cli::kExitOk && ran;
        counter_resid =
            std::abs(meta_value(cli::read_meta(out_counter / "reconstruction.meta"),
                                "f_pi_residual"));
    } catch (const std::exception& e) {
        report(9, "first-limit endpoint gate", false, std::string("runner threw: ") + e.what());
        return;
    }
    const bool pass = ran && zero_resid <= 1e-2 && p1_resid <= 1e-2 && counter_resid >= 0.1;
    report(9, "first-limit endpoint gate", pass,
           "|f_hat(pi) + pi/2| = " + num(zero_resid) + " (unloaded), " + num(p1_resid) +
               " (loaded), both <= 1e-2; shifted fixture = " + num(counter_resid) +
               " (expect >= 0.1)");
}

// ---- 10: determinism ------------------------------------------------------------
// Two consecutive round-trip runs produce byte-identical files.
void criterion10(const fs::path& out_a, const fs::path& out_b) {
    cli::RunConfig cfg;
    cfg.problem = fixtures::p1_problem(1200);
    cfg.grid_n = 1200;
    bool ran = true;
    try {
        cli::RunFlags fa;
        fa.out_dir = out_a;
        ran = cli::run_roundtrip(cfg, fa) == cli::kExitOk && ran;
        cli::RunFlags fb;
        fb.out_dir = out_b;
        ran = cli::run_roundtrip(cfg, fb) == cli::kExitOk && ran;
    } catch (const std::exception& e) {
        report(10, "determinism", false, std::string("runner threw: ") + e.what());
        return;
    }
    const char* files[] = {"spectrum.csv", "nodes.csv", "reconstruction.csv",
                           "reconstruction.meta", "roundtrip.meta"};
    int identical = 0;
    std::string mismatch;
    for (const char* f : files) {
        const std::string a = slurp(out_a / f), b = slurp(out_b / f);
        if (!a.empty() && a == b) {
            ++identical;
        } else {
            if (!mismatch.empty()) mismatch += ", ";
            mismatch += f;
        }
    }
    const bool pass = ran && identical == 5;
    report(10, "determinism", pass,
           std::to_string(identical) + "/5 output files byte-identical across two runs" +
               (mismatch.empty() ? "" : " (mismatch: " + mismatch + ")"));
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = work_dir();
    std::printf("acceptance run, scratch dir %s\n", dir.c_str());

    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    const fs::path p1_dir = dir / "roundtrip_loaded";
    criterion7(p1_dir);
    criterion8(dir / "check_zero");
    criterion9(p1_dir, dir / "roundtrip_zero", dir / "roundtrip_shifted");
    criterion10(dir / "det_a", dir / "det_b");

    std::printf("%d/10 criteria passed (%.1f s total)\n", 10 - g_failures,
                seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
