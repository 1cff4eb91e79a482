#pragma once
// Nodal inversion: recover the boundary angle, the boundary weight at pi, and
// the potential entries from nodal-point data alone. The estimators are staged
// finite-n approximations of three scaling limits of the node positions; each
// stage extrapolates a node-indexed sequence in n and feeds the next.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nodal/numerics.hpp"

namespace nodal::inverse {

struct InverseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Nodal data: for each index n, the n zeros of the first solution component
// at the n-th eigenvalue, strictly increasing inside (0, pi).
struct NodalSet {
    std::map<int, std::vector<double>> entries;
    std::string provenance;  // "forward-computed", "synthetic", file name, ...
};

// Structural checks on every entry: length exactly n, strictly increasing,
// inside the open interval (0, pi). Throws InverseError naming the first
// offending index.
void validate(const NodalSet& set);

// Uniform evaluation grid for the recovered functions. It deliberately stays
// clear of the endpoints: the estimators interpolate between neighbouring
// nodes, and the first and last node of a given n sit O(1/n) inside (0, pi).
// Endpoint values are recovered separately by quadratic extrapolation.
struct InversionGrid {
    double lo = 0.05;
    double hi = PI - 0.05;
    int points = 101;

    double step() const { return (hi - lo) / (points - 1); }
    double x(int i) const { return i == points - 1 ? hi : lo + i * step(); }
    std::vector<double> abscissae() const;
    bool operator==(const InversionGrid& o) const {
        return lo == o.lo && hi == o.hi && points == o.points;
    }
};

// A function sampled on an inversion grid, plus the per-point rms misfit of
// the sequence fit that produced it (empty for derived curves).
struct Curve {
    InversionGrid grid;
    std::vector<double> values;
    std::vector<double> fit_rms;

    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(values.size()); }
    // 4-point Lagrange interpolation/clamped extrapolation at x.
    double at(double x) const;
};

// The three scaling limits of the node positions, as estimated curves.
struct LimitFunctions {
    Curve f_hat;  // first limit:  n * x_n^j - (j + 1/2) pi
    Curve g_hat;  // second limit: 2 n pi * [first-limit residual]
    Curve h_hat;  // third limit:  2 n^2 pi * [second-limit residual]
};

// Fixed-point diagnostics for the third-stage constant.
struct StageThreeDiagnostics {
    bool converged = false;
    int iterations = 0;
    double last_delta = 0.0;  // |a_hat change| at the final iteration
    double h_spread = 0.0;    // max relative deviation of h/(mu+theta) from its mean
};

struct Options {
    std::vector<int> n_list{50, 100, 200, 400};
    InversionGrid grid{};
    int stage3_max_iterations = 5;
    double stage3_tolerance = 1e-10;
    // |sin 2 theta| below this marks the v(0) formula degenerate.
    double degenerate_sin_bound = 0.1;
    // |v0_hat| must exceed this for its sign to be trusted.
    double v0_sign_tolerance = 1e-6;
};

struct Reconstruction {
    double theta_hat = 0.0;
    double omega_pi_hat = 0.0;
    double v0_hat = 0.0;          // meaningful only when !v0_degenerate
    bool v0_degenerate = false;   // |sin 2 theta_hat| at or below the bound
    double a_hat = 0.0;           // spectral 1/n coefficient

    Curve mu_hat;        // algebraic, no differentiation
    Curve mu_prime_hat;  // half of (p_hat + r_hat), exactly
    Curve v_sq_hat;      // clipped at zero
    Curve v_hat;         // half of (p_hat - r_hat), exactly
    Curve p_hat;
    Curve r_hat;

    LimitFunctions limits;

    // Diagnostics.
    double f_pi_residual = 0.0;   // extrapolated f_hat(pi) + pi/2 (vanishes when mu(pi) = 0)
    double h_spread = 0.0;        // relative constancy defect of h/(mu+theta)
    double v_sq_cross_check = 0.0;  // max gap between the two algebraic v^2 forms
    int clip_count = 0;           // negative v^2 samples clipped to zero
    bool v_sign_defaulted = false;  // sign of v fell back to +1
    bool stage3_converged = false;
    double stage3_last_delta = 0.0;
};

// Node of X at level n closest to x; ties resolve to the smaller index.
// Throws InverseError when n is absent.
std::pair<int, double> select_nodes(const NodalSet& set, double x, int n);

// First-stage estimate at x = 0: theta_hat from the j = 0 nodes,
// theta(n) = n * x_n^0 - pi/2, extrapolated with the {1, 1/n} model.
double estimate_theta(const NodalSet& set, const std::vector<int>& n_list);

// First limit function: per grid point, the node-indexed samples
// T1_j(n) = n * x_n^j - (j + 1/2) pi are interpolated to x and the resulting
// sequence extrapolated with the {1, 1/n} model. Needs at least two levels.
Curve estimate_f(const NodalSet& set, const InversionGrid& grid,
                 const std::vector<int>& n_list);

// Algebraic stage: mu_hat(x) = f_hat(x) - theta_hat + x (pi + 2 theta_hat) / (2 pi)
// and mu_prime_hat = f_hat' + 1/2 + theta_hat / pi (second-order differences).
std::pair<Curve, Curve> stage1(const Curve& f_hat, double theta_hat);

// Second limit function: T2_j(n) = 2 n pi * [n x_n^j - (j+1/2) pi
// - mu_hat(x_n^j) - theta_hat + (j+1/2)(pi + 2 theta_hat)/(2n)], blended
// linearly between the two nodes bracketing each grid point and extrapolated
// with the {n, 1, 1/n} model (the n term absorbs first-stage bias).
Curve estimate_g(const NodalSet& set, const std::vector<int>& n_list,
                 double theta_hat, const Curve& mu_hat);

// Third limit function and the spectral constant a_hat, via a fixed-point
// loop: a candidate a_hat fixes the eigenvalue model lambda_n and the phase
// integrand B_hat, the counter-termed sequence T3 extrapolates with the
// {n^2, n, 1, 1/n} model to h_hat, and the constancy identity
// h/(mu + theta) = (pi + 2 theta)^2/(2 pi) - A updates a_hat. At most
// max_iterations sweeps; non-convergence falls back to the last iterate and
// is reported through the diagnostics, never thrown.
std::pair<Curve, double> estimate_h(const NodalSet& set, const std::vector<int>& n_list,
                                    double theta_hat, const Curve& mu_hat,
                                    const Curve& g_hat, int max_iterations = 5,
                                    double tolerance = 1e-10,
                                    StageThreeDiagnostics* diagnostics = nullptr);

// Full pipeline: theta -> f -> (mu, mu') -> g -> (h, a), then the boundary
// weight, v(0), and the potential split:
//   omega_pi_hat = (g_hat(pi) - pi theta_hat - pi^2/2) / (2 pi)
//   v0_hat       = (g_hat(0) + theta_hat (pi + 2 theta_hat)) / (pi sin 2 theta_hat)
//   v_sq_hat     = [g_hat' + mu_prime_hat (pi + 2 theta_hat) + a_hat
//                   - (pi + 2 theta_hat)^2/(2 pi)] / pi + l_known'
// (cross-checked against the equivalent form through h_hat(0)/theta_hat),
//   p_hat = mu_prime_hat + v_hat,  r_hat = mu_prime_hat - v_hat,
// with v_hat = sign * sqrt(v_sq_hat). Endpoint values of the limit curves
// come from quadratic extrapolation through the three nearest grid points.
// l_known is the running integral of the kernel's antisymmetric diagonal
// part, sampled on the standard [0, pi] grid; omit it for a zero kernel.
// Requires every n in options.n_list to be present and at least four levels.
Reconstruction reconstruct(const NodalSet& set,
                           const std::optional<SampledFunction>& l_known,
                           const Options& options = {});

}  // namespace nodal::inverse
