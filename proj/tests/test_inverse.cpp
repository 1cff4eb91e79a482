#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <optional>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "nodal/asymptotics.hpp"
#include "nodal/forward.hpp"
#include "nodal/inverse.hpp"

using namespace nodal;
using inverse::Curve;
using inverse::InverseError;
using inverse::InversionGrid;
using inverse::NodalSet;

namespace {

const std::vector<int> kLevels{50, 100, 200, 400};

NodalSet zero_set(double theta, const std::vector<int>& ns = kLevels) {
    NodalSet set;
    set.provenance = "synthetic";
    for (int n : ns) set.entries[n] = fixtures::zero_nodes(theta, n);
    return set;
}

NodalSet p1_synthetic_set(double gamma = 0.0) {
    NodalSet set;
    set.provenance = "synthetic";
    for (int n : kLevels) set.entries[n] = fixtures::p1_synthetic_nodes(n, gamma);
    return set;
}

SampledFunction p1_l_known(int grid_n = 2000) {
    Grid g(grid_n);
    std::vector<double> vals(static_cast<size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) vals[static_cast<size_t>(i)] = fixtures::p1_bigL(g.x(i));
    return SampledFunction(g, std::move(vals));
}

double sup_against(const Curve& c, double (*truth)(double), double lo = -1.0, double hi = 1e9) {
    double worst = 0.0;
    for (int i = 0; i < c.size(); ++i) {
        const double x = c.grid.x(i);
        if (x < lo || x > hi) continue;
        worst = std::max(worst, std::abs(c[i] - truth(x)));
    }
    return worst;
}

double sup_abs(const Curve& c) {
    double worst = 0.0;
    for (int i = 0; i < c.size(); ++i) worst = std::max(worst, std::abs(c[i]));
    return worst;
}

// Least-squares slope of log|err| against log n.
double loglog_slope(const std::vector<int>& ns, const std::vector<double>& errs) {
    const int m = static_cast<int>(ns.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        const double lx = std::log(static_cast<double>(ns[static_cast<size_t>(i)]));
        const double ly = std::log(errs[static_cast<size_t>(i)]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("validate rejects malformed nodal sets") {
    NodalSet good = zero_set(PI / 3, {3, 5});
    CHECK_NOTHROW(inverse::validate(good));

    NodalSet wrong_len = good;
    wrong_len.entries[3].pop_back();
    CHECK_THROWS_AS(inverse::validate(wrong_len), InverseError);

    NodalSet decreasing = good;
    std::swap(decreasing.entries[5][1], decreasing.entries[5][2]);
    CHECK_THROWS_AS(inverse::validate(decreasing), InverseError);

    NodalSet outside = good;
    outside.entries[3][0] = 0.0;  // boundary itself is excluded
    CHECK_THROWS_AS(inverse::validate(outside), InverseError);
    outside.entries[3][0] = PI;
    CHECK_THROWS_AS(inverse::validate(outside), InverseError);

    NodalSet not_finite = good;
    not_finite.entries[5][2] = std::nan("");
    CHECK_THROWS_AS(inverse::validate(not_finite), InverseError);

    NodalSet bad_level;
    bad_level.entries[0] = {};
    CHECK_THROWS_AS(inverse::validate(bad_level), InverseError);
}

TEST_CASE("select_nodes picks the closest node, ties to the smaller index") {
    NodalSet set = zero_set(PI / 2, {3});
    auto [j, node] = inverse::select_nodes(set, 1.6, 3);
    CHECK(j == 1);
    CHECK(node == doctest::Approx(PI / 2).epsilon(1e-14));

    auto [j0, node0] = inverse::select_nodes(set, 0.01, 3);
    CHECK(j0 == 0);
    CHECK(node0 == doctest::Approx(PI / 4).epsilon(1e-14));

    NodalSet tied;
    tied.entries[2] = {1.0, 2.0};
    CHECK(inverse::select_nodes(tied, 1.5, 2).first == 0);

    CHECK_THROWS_AS(inverse::select_nodes(set, 1.0, 7), InverseError);
}

TEST_CASE("curve interpolation matches the generic stencil bitwise") {
    InversionGrid grid;
    Curve c;
    c.grid = grid;
    c.values.resize(static_cast<size_t>(grid.points));
    for (int i = 0; i < grid.points; ++i)
        c.values[static_cast<size_t>(i)] = std::sin(3.0 * grid.x(i)) + 0.2 * grid.x(i);
    const std::vector<double> xs = grid.abscissae();
    for (double x : {0.02, 0.05, 0.3141, 1.0, 2.718, 3.0915, 3.2, grid.x(17), grid.x(100)}) {
        const double a = c.at(x);
        const double b = interp_cubic(xs, c.values, x);
        CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
}

TEST_CASE("zero problem: full reconstruction recovers the trivial coefficients") {
    auto R = inverse::reconstruct(zero_set(PI / 2), std::nullopt, {});

    CHECK(std::abs(R.theta_hat - PI / 2) <= 2e-3);
    CHECK(std::abs(R.omega_pi_hat) <= 5e-2);
    CHECK(std::abs(R.a_hat) <= 5e-2);
    CHECK(R.v0_degenerate);  // sin 2theta = 0 at theta = pi/2
    CHECK(R.v_sign_defaulted);

    // f(x) = pi/2 - x is inside the fit model, so it is recovered to rounding.
    double worst_f = 0.0, worst_g = 0.0, worst_h = 0.0;
    for (int i = 0; i < R.limits.f_hat.size(); ++i) {
        const double x = R.limits.f_hat.grid.x(i);
        worst_f = std::max(worst_f, std::abs(R.limits.f_hat[i] - (PI / 2 - x)));
        worst_g = std::max(worst_g, std::abs(R.limits.g_hat[i] - (2 * PI * x - PI * PI)));
        worst_h = std::max(worst_h, std::abs(R.limits.h_hat[i] - PI * PI));
    }
    CHECK(worst_f <= 1e-10);
    CHECK(worst_g <= 5e-2);
    CHECK(worst_h <= 2e-1);

    CHECK(sup_abs(R.mu_hat) <= 1e-2);
    CHECK(sup_abs(R.v_sq_hat) <= 5e-2);
    CHECK(sup_abs(R.p_hat) <= 5e-2);
    CHECK(sup_abs(R.r_hat) <= 5e-2);
    CHECK(std::abs(R.f_pi_residual) <= 1e-2);
    CHECK(R.h_spread <= 5e-2);
    CHECK(R.clip_count == 0);
}

TEST_CASE("zero problem at a generic angle: estimator accuracy and decay rate") {
    const double theta = PI / 3;
    NodalSet set = zero_set(theta);

    const double theta_hat = inverse::estimate_theta(set, kLevels);
    CHECK(std::abs(theta_hat - theta) <= 2e-3);

    auto R = inverse::reconstruct(set, std::nullopt, {});
    CHECK(std::abs(R.theta_hat - theta) <= 2e-3);
    CHECK(!R.v0_degenerate);
    CHECK(std::abs(R.v0_hat) <= 2e-3);
    CHECK(std::abs(R.f_pi_residual) <= 5e-3);
    CHECK(sup_abs(R.p_hat) <= 5e-2);
    CHECK(sup_abs(R.r_hat) <= 5e-2);

    const double d = PI + 2 * theta;
    double worst_f = 0.0;
    for (int i = 0; i < R.limits.f_hat.size(); ++i) {
        const double x = R.limits.f_hat.grid.x(i);
        worst_f = std::max(worst_f, std::abs(R.limits.f_hat[i] - (theta - x * d / (2 * PI))));
    }
    CHECK(worst_f <= 2e-3);

    // Single-level angle estimates decay like 1/n: log-log slope near -1.
    // (The first-order probe itself is exact on this problem -- the nodes are
    // rational in n -- so its decay is measured on curved data below.)
    std::vector<double> theta_errs;
    for (int n : kLevels) {
        const auto& nodes = set.entries.at(n);
        theta_errs.push_back(std::abs(n * nodes[0] - PI / 2 - theta));
    }
    const double slope_theta = loglog_slope(kLevels, theta_errs);
    CHECK(slope_theta >= -1.3);
    CHECK(slope_theta <= -0.7);

    // On curved synthetic data the single-level first-order probe at a fixed
    // interior point carries a genuine 1/n error term.
    std::vector<double> t1_errs;
    const double x_probe = 1.0;
    for (int n : kLevels) {
        const auto nodes = fixtures::p1_synthetic_nodes(n);
        std::vector<double> t1(nodes.size());
        for (size_t j = 0; j < nodes.size(); ++j)
            t1[j] = n * nodes[j] - (static_cast<double>(j) + 0.5) * PI;
        const double probe = interp_cubic(nodes, t1, x_probe);
        t1_errs.push_back(std::abs(probe - fixtures::p1_f(x_probe)));
    }
    const double slope_t1 = loglog_slope(kLevels, t1_errs);
    CHECK(slope_t1 >= -1.3);
    CHECK(slope_t1 <= -0.7);
}

TEST_CASE("constant boundary weight shifts the spectral constants") {
    // omega = c on the zero background: the characteristic function has the
    // closed form cos(lambda pi - theta) - (c/lambda)(sin(lambda pi - theta)
    // + sin theta), so eigenvalues come from plain bisection and the nodes
    // keep their closed form.
    const double theta = PI / 2, c = 0.01;
    NodalSet set;
    set.provenance = "synthetic";
    for (int n : kLevels) {
        auto chi = [&](double lam) {
            return std::cos(lam * PI - theta) -
                   (c / lam) * (std::sin(lam * PI - theta) + std::sin(theta));
        };
        const double guess = n + 0.5 + theta / PI;
        const double lam = bisect(chi, guess - 0.3, guess + 0.3, 1e-14);
        std::vector<double> xs(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j) xs[static_cast<size_t>(j)] = ((j + 0.5) * PI + theta) / lam;
        set.entries[n] = xs;
    }

    auto R = inverse::reconstruct(set, std::nullopt, {});
    CHECK(std::abs(R.a_hat - (-2 * c)) <= 1e-1);
    CHECK(std::abs(R.a_hat - (-2 * c)) <= 5e-2);

    // g(pi) recovered within the stated budget...
    const double g_pi_target = PI * theta + PI * PI / 2 + 2 * PI * c;
    const double g_pi_hat = PI * R.theta_hat + PI * PI / 2 + 2 * PI * R.omega_pi_hat;
    CHECK(std::abs(g_pi_hat - g_pi_target) <= 1e-1);

    // ...but the weight estimate itself lands on c + omega(0) sin theta, not c:
    // with every level even, the alternating spectral term the eigenvalues
    // carry is coherent and the fit absorbs it into the boundary constant.
    CHECK(std::abs(R.omega_pi_hat - 2 * c) <= 1e-3);
}

TEST_CASE("loaded synthetic nodes: the full pipeline hits every target") {
    auto R = inverse::reconstruct(p1_synthetic_set(), p1_l_known(), {});

    CHECK(std::abs(R.theta_hat - fixtures::p1_theta()) <= 5e-3);
    CHECK(std::abs(R.omega_pi_hat - fixtures::p1_omega_pi()) <= 5e-2);
    CHECK(std::abs(R.a_hat - fixtures::p1_a_const()) <= 5e-2);
    CHECK(!R.v0_degenerate);
    CHECK(std::abs(R.v0_hat - 0.3) <= 5e-3);
    CHECK(!R.v_sign_defaulted);

    CHECK(sup_against(R.limits.f_hat, fixtures::p1_f) <= 5e-3);
    CHECK(sup_against(R.limits.g_hat, fixtures::p1_g) <= 1e-1);
    CHECK(sup_against(R.limits.h_hat, fixtures::p1_h) <= 1.0);
    CHECK(sup_against(R.mu_hat, fixtures::p1_mu) <= 1e-2);

    double worst_mup = 0.0, worst_vsq = 0.0, worst_p = 0.0, worst_r = 0.0;
    for (int i = 0; i < R.mu_prime_hat.size(); ++i) {
        const double x = R.mu_prime_hat.grid.x(i);
        worst_mup = std::max(worst_mup,
                             std::abs(2 * R.mu_prime_hat[i] - 0.3 * std::cos(2 * x)));
        const double v = fixtures::p1_v(x);
        worst_vsq = std::max(worst_vsq, std::abs(R.v_sq_hat[i] - v * v));
        worst_p = std::max(worst_p, std::abs(R.p_hat[i] - fixtures::p1_p(x)));
        worst_r = std::max(worst_r, std::abs(R.r_hat[i] - fixtures::p1_r(x)));
    }
    CHECK(worst_mup <= 5e-2);
    CHECK(worst_vsq <= 5e-2);
    CHECK(worst_p <= 5e-2);
    CHECK(worst_r <= 5e-2);

    CHECK(std::abs(R.f_pi_residual) <= 1e-2);
    CHECK(R.h_spread <= 5e-2);
    CHECK(R.clip_count == 0);
}

TEST_CASE("alternating spectral term: boundary-weight bias, potential immune") {
    // Same synthetic nodes, plus the alternating eigenvalue correction the
    // true spectrum carries. With all-even levels it is coherent: the weight
    // estimate shifts by omega(0) sin theta and the spectral constant by
    // -2 omega(0) sin theta, while their contributions to v^2 cancel exactly,
    // leaving the recovered potential clean.
    const double gamma = 0.1 * std::sin(fixtures::p1_theta());  // omega(0) sin theta
    auto R = inverse::reconstruct(p1_synthetic_set(gamma), p1_l_known(), {});

    const double omega_bias = R.omega_pi_hat - fixtures::p1_omega_pi();
    CHECK(omega_bias >= 0.07);
    CHECK(omega_bias <= 0.10);
    CHECK(std::abs(R.a_hat - (fixtures::p1_a_const() - 2 * gamma)) <= 5e-2);

    double worst_p = 0.0, worst_r = 0.0;
    for (int i = 0; i < R.p_hat.size(); ++i) {
        const double x = R.p_hat.grid.x(i);
        worst_p = std::max(worst_p, std::abs(R.p_hat[i] - fixtures::p1_p(x)));
        worst_r = std::max(worst_r, std::abs(R.r_hat[i] - fixtures::p1_r(x)));
    }
    CHECK(worst_p <= 5e-2);
    CHECK(worst_r <= 5e-2);
}

TEST_CASE("forward roundtrip on the loaded fixture") {
    auto prob = fixtures::p1_problem(4000);
    forward::ForwardSolver solver(prob);
    auto cfg = asym::make_config(prob);
    NodalSet set;
    set.provenance = "forward-computed";
    for (int n : kLevels) {
        const double lam =
            forward::refine_eigenvalue(solver, asym::lambda_asym(cfg, n), 1e-12, 0.3);
        auto nl = forward::nodes_with_solver(solver, lam, n, 1e-13);
        REQUIRE(nl.count_matches);
        set.entries[n] = nl.nodes;
    }
    inverse::validate(set);

    auto R = inverse::reconstruct(set, p1_l_known(), {});

    // First-stage quantities are solver-grade accurate.
    CHECK(std::abs(R.theta_hat - fixtures::p1_theta()) <= 5e-3);
    CHECK(sup_against(R.limits.f_hat, fixtures::p1_f) <= 5e-3);
    CHECK(sup_against(R.mu_hat, fixtures::p1_mu) <= 1e-2);
    double worst_mup = 0.0;
    for (int i = 0; i < R.mu_prime_hat.size(); ++i) {
        const double x = R.mu_prime_hat.grid.x(i);
        worst_mup = std::max(worst_mup,
                             std::abs(2 * R.mu_prime_hat[i] - 0.3 * std::cos(2 * x)));
    }
    CHECK(worst_mup <= 5e-2);
    CHECK(std::abs(R.f_pi_residual) <= 1e-2);

    // The later stages sit on documented floors: the boundary-weight estimate
    // absorbs omega(0) sin theta (all-even levels), and the third stage
    // amplifies the spectrum's unmodelled 1/n^2 structure, which feeds the
    // spectral constant and through it the recovered potential.
    const double omega_bias = R.omega_pi_hat - fixtures::p1_omega_pi();
    CHECK(omega_bias >= 0.06);
    CHECK(omega_bias <= 0.11);
    const double g_err = sup_against(R.limits.g_hat, fixtures::p1_g);
    CHECK(g_err >= 0.3);
    CHECK(g_err <= 0.9);
    const double p_err = sup_against(R.p_hat, fixtures::p1_p, 0.2, PI - 0.2);
    CHECK(p_err >= 0.15);
    CHECK(p_err <= 0.5);
    CHECK(R.h_spread >= 0.5);
    CHECK(R.clip_count >= 10);

    // Noise stability: +-1e-6 uniform perturbation moves theta_hat barely.
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-1e-6, 1e-6);
    NodalSet noisy = set;
    for (auto& [n, nodes] : noisy.entries)
        for (auto& x : nodes) x += u(rng);
    auto Rn = inverse::reconstruct(noisy, p1_l_known(), {});
    CHECK(std::abs(Rn.theta_hat - R.theta_hat) <= 1e-3);

    // More levels improve the angle estimate.
    const double th_short = inverse::estimate_theta(set, {50, 100});
    CHECK(std::abs(th_short - fixtures::p1_theta()) <= 5e-3);
    CHECK(std::abs(th_short - fixtures::p1_theta()) >=
          std::abs(R.theta_hat - fixtures::p1_theta()));
}

TEST_CASE("reconstruction invariants hold exactly") {
    auto R = inverse::reconstruct(p1_synthetic_set(), p1_l_known(), {});
    CHECK(R.theta_hat > 0.0);
    CHECK(R.theta_hat < PI);
    for (int i = 0; i < R.p_hat.size(); ++i) {
        const double sum = R.p_hat[i] + R.r_hat[i];
        const double twice_mup = 2.0 * R.mu_prime_hat[i];
        CHECK(std::memcmp(&sum, &twice_mup, sizeof sum) == 0);
        const double diff = R.p_hat[i] - R.r_hat[i];
        const double twice_v = 2.0 * R.v_hat[i];
        CHECK(std::memcmp(&diff, &twice_v, sizeof diff) == 0);
        CHECK(R.v_sq_hat[i] >= 0.0);
    }

    // Determinism: a second run reproduces every output bitwise.
    auto R2 = inverse::reconstruct(p1_synthetic_set(), p1_l_known(), {});
    CHECK(R.theta_hat == R2.theta_hat);
    CHECK(R.omega_pi_hat == R2.omega_pi_hat);
    CHECK(R.a_hat == R2.a_hat);
    CHECK(std::memcmp(R.p_hat.values.data(), R2.p_hat.values.data(),
                      R.p_hat.values.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(R.limits.h_hat.values.data(), R2.limits.h_hat.values.data(),
                      R.limits.h_hat.values.size() * sizeof(double)) == 0);
}

TEST_CASE("stage-three fixed point: convergence reporting and fallback") {
    NodalSet set = zero_set(PI / 2);
    const double theta_hat = inverse::estimate_theta(set, kLevels);
    InversionGrid grid;
    Curve f_hat = inverse::estimate_f(set, grid, kLevels);
    auto [mu_hat, mu_prime_hat] = inverse::stage1(f_hat, theta_hat);
    Curve g_hat = inverse::estimate_g(set, kLevels, theta_hat, mu_hat);

    // The pinned tolerance of 1e-10 is not reachable in five sweeps; the
    // fallback keeps the last iterate and says so.
    inverse::StageThreeDiagnostics diag;
    auto [h_hat, a_hat] = inverse::estimate_h(set, kLevels, theta_hat, mu_hat, g_hat,
                                              5, 1e-10, &diag);
    CHECK(!diag.converged);
    CHECK(diag.iterations == 5);
    CHECK(diag.last_delta > 0.0);
    CHECK(diag.last_delta <= 1e-6);
    CHECK(std::abs(a_hat) <= 5e-2);

    // A realistic tolerance converges in a couple of sweeps.
    inverse::StageThreeDiagnostics diag2;
    inverse::estimate_h(set, kLevels, theta_hat, mu_hat, g_hat, 5, 1e-4, &diag2);
    CHECK(diag2.converged);
    CHECK(diag2.iterations >= 2);
    CHECK(diag2.iterations <= 5);

    // A single sweep cannot confirm its own convergence.
    inverse::StageThreeDiagnostics diag1;
    inverse::estimate_h(set, kLevels, theta_hat, mu_hat, g_hat, 1, 1e-10, &diag1);
    CHECK(!diag1.converged);
    CHECK(diag1.iterations == 1);
}

TEST_CASE("estimator stages validate their inputs") {
    NodalSet set = zero_set(PI / 3);
    InversionGrid grid;

    CHECK_THROWS_AS(inverse::estimate_theta(set, {50}), InverseError);
    CHECK_THROWS_AS(inverse::estimate_f(set, grid, {50, 70}), InverseError);  // 70 absent

    Curve f_hat = inverse::estimate_f(set, grid, kLevels);
    auto [mu_hat, mu_prime_hat] = inverse::stage1(f_hat, PI / 3);
    CHECK_THROWS_AS(inverse::estimate_g(set, {50, 100}, PI / 3, mu_hat), InverseError);
    Curve g_hat = inverse::estimate_g(set, kLevels, PI / 3, mu_hat);
    CHECK_THROWS_AS(inverse::estimate_h(set, {50, 100, 200}, PI / 3, mu_hat, g_hat),
                    InverseError);
    CHECK_THROWS_AS(inverse::estimate_h(set, kLevels, PI / 3, mu_hat, g_hat, 0, 1e-10),
                    InverseError);

    inverse::Options opt;
    opt.n_list = {50, 100};
    CHECK_THROWS_AS(inverse::reconstruct(set, std::nullopt, opt), InverseError);

    // Mismatched curve grids are rejected.
    InversionGrid other;
    other.points = 51;
    Curve g_other = inverse::estimate_g(set, kLevels, PI / 3,
                                        inverse::estimate_f(set, other, kLevels));
    CHECK_THROWS_AS(inverse::estimate_h(set, kLevels, PI / 3, mu_hat, g_other),
                    InverseError);

    // Data implying an angle outside (0, pi) are rejected outright.
    NodalSet shifted;
    for (int n : kLevels) {
        std::vector<double> xs(static_cast<size_t>(n));
        const double lam = n + 0.5 - 0.3 / PI;
        for (int j = 0; j < n; ++j)
            xs[static_cast<size_t>(j)] = ((j + 0.5) * PI - 0.3) / lam;
        shifted.entries[n] = xs;
    }
    CHECK_THROWS_AS(inverse::reconstruct(shifted, std::nullopt, {}), InverseError);
}

TEST_CASE("stage1 on the trivial angle kills both outputs") {
    // f = pi/2 - x with theta = pi/2 gives mu = 0 and mu' = -1 + 1/2 + 1/2 = 0.
    InversionGrid grid;
    Curve f;
    f.grid = grid;
    f.values.resize(static_cast<size_t>(grid.points));
    for (int i = 0; i < grid.points; ++i)
        f.values[static_cast<size_t>(i)] = PI / 2 - grid.x(i);
    auto [mu_hat, mu_prime_hat] = inverse::stage1(f, PI / 2);
    CHECK(sup_abs(mu_hat) <= 1e-13);
    CHECK(sup_abs(mu_prime_hat) <= 1e-12);
}
