#pragma once
// Problem fixtures shared across the test suites: the trivial zero problem
// and one fully-loaded smooth problem ("p1") whose coefficient functions all
// have closed forms, so every derived quantity can be checked against pencil
// and paper.

#include <cmath>
#include <string>

#include "nodal/model.hpp"

namespace fixtures {

inline nodal::model::Problem zero_problem(double theta, int grid_n = 4000,
                                          const std::string& omega_src = "0") {
    using nodal::expr::Arity;
    using nodal::model::FunctionSpec;
    nodal::model::Problem prob;
    prob.theta = theta;
    prob.p = FunctionSpec::expression("0", Arity::univariate);
    prob.r = FunctionSpec::expression("0", Arity::univariate);
    prob.m11 = FunctionSpec::expression("0", Arity::bivariate);
    prob.m12 = FunctionSpec::expression("0", Arity::bivariate);
    prob.m21 = FunctionSpec::expression("0", Arity::bivariate);
    prob.m22 = FunctionSpec::expression("0", Arity::bivariate);
    prob.omega = FunctionSpec::expression(omega_src, Arity::univariate);
    prob.grid = nodal::Grid(grid_n);
    return prob;
}

// Smooth non-trivial problem with closed-form coefficients:
//   mu(x) = 0.075 sin 2x (so mu(pi) = 0), v(x) = 0.2 + 0.1 cos x,
//   K(x) = 0.1 x, L(x) = 0.15 (x + sin x cos x), omega(pi) = 0.1 (1 + pi).
inline nodal::model::Problem p1_problem(int grid_n = 4000) {
    using nodal::expr::Arity;
    using nodal::model::FunctionSpec;
    nodal::model::Problem prob;
    prob.theta = nodal::PI / 3.0;
    prob.p = FunctionSpec::expression("0.15*cos(2*x)+0.2+0.1*cos(x)", Arity::univariate);
    prob.r = FunctionSpec::expression("0.15*cos(2*x)-0.2-0.1*cos(x)", Arity::univariate);
    prob.m11 = FunctionSpec::expression("0.2*cos(x-t)", Arity::bivariate);
    prob.m12 = FunctionSpec::expression("0.3*cos(x)*cos(t)", Arity::bivariate);
    prob.m21 = FunctionSpec::expression("0", Arity::bivariate);
    prob.m22 = FunctionSpec::expression("0.1*cos(x-t)", Arity::bivariate);
    prob.omega = FunctionSpec::expression("0.1*(1+x)", Arity::univariate);
    prob.grid = nodal::Grid(grid_n);
    return prob;
}

inline double p1_p(double x) { return 0.15 * std::cos(2 * x) + 0.2 + 0.1 * std::cos(x); }
inline double p1_r(double x) { return 0.15 * std::cos(2 * x) - 0.2 - 0.1 * std::cos(x); }
inline double p1_mu(double x) { return 0.075 * std::sin(2 * x); }
inline double p1_v(double x) { return 0.2 + 0.1 * std::cos(x); }
inline double p1_bigK(double x) { return 0.1 * x; }
inline double p1_bigL(double x) { return 0.15 * (x + std::sin(x) * std::cos(x)); }
inline double p1_omega(double x) { return 0.1 * (1 + x); }

// Constants derived from the closed forms above.
inline double p1_theta() { return nodal::PI / 3.0; }
inline double p1_omega_pi() { return 0.1 * (1 + nodal::PI); }
inline double p1_d_const() { return nodal::PI + 2 * nodal::PI / 3.0; }
inline double p1_a_const() {
    // v(0) sin 2theta + int_0^pi v^2 - L(pi) - 2 omega(pi), with
    // int v^2 = int (0.04 + 0.04 cos x + 0.01 cos^2 x) = 0.045 pi
    return 0.3 * std::sin(2 * nodal::PI / 3.0) + 0.045 * nodal::PI - 0.15 * nodal::PI -
           0.2 * (1 + nodal::PI);
}
inline double p1_b_fun(double x) {
    // v(0) sin 2theta + int_0^x v^2 - L(x)
    const double vsq_int = 0.04 * x + 0.04 * std::sin(x) +
                           0.005 * (x + std::sin(x) * std::cos(x));
    return 0.3 * std::sin(2 * nodal::PI / 3.0) + vsq_int - p1_bigL(x);
}

// Closed forms of the three nodal scaling limits for p1.
inline double p1_f(double x) {
    return p1_mu(x) + p1_theta() - x * p1_d_const() / (2 * nodal::PI);
}
inline double p1_g(double x) {
    const double d = p1_d_const();
    return -(p1_mu(x) + p1_theta()) * d - x * p1_a_const() + x * d * d / (2 * nodal::PI) +
           nodal::PI * p1_b_fun(x);
}
inline double p1_h(double x) {
    const double d = p1_d_const();
    return (p1_mu(x) + p1_theta()) * (d * d / (2 * nodal::PI) - p1_a_const());
}

// Exact nodes of the zero problem: the first component is cos(lambda x - theta),
// so the n-th eigenvalue is n + 1/2 + theta/pi and the nodes have closed form.
inline std::vector<double> zero_nodes(double theta, int n) {
    const double lam = n + 0.5 + theta / nodal::PI;
    std::vector<double> xs(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        xs[static_cast<size_t>(j)] = ((j + 0.5) * nodal::PI + theta) / lam;
    return xs;
}

// Synthetic p1 nodes that satisfy the truncated nodal phase equation exactly
// under the model eigenvalue lambda_n = n + d/(2 pi) + A/(2 pi n); gamma adds
// the alternating spectral term -(-1)^n gamma/(pi n) the full problem carries.
inline std::vector<double> p1_synthetic_nodes(int n, double gamma = 0.0) {
    const double th = p1_theta();
    double lam = n + p1_d_const() / (2 * nodal::PI) + p1_a_const() / (2 * nodal::PI * n);
    if (gamma != 0.0) {
        const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
        lam -= sgn * gamma / (nodal::PI * n);
    }
    std::vector<double> xs(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        double x = ((j + 0.5) * nodal::PI + th) / lam;
        for (int it = 0; it < 50; ++it) {
            const double psi = lam * x - p1_mu(x) - th - (j + 0.5) * nodal::PI -
                               p1_b_fun(x) / (2 * lam);
            const double v = p1_v(x);
            const double db = v * v - 0.15 * (1 + std::cos(2 * x));
            const double step = psi / (lam - 0.15 * std::cos(2 * x) - db / (2 * lam));
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        xs[static_cast<size_t>(j)] = x;
    }
    return xs;
}

}  // namespace fixtures
