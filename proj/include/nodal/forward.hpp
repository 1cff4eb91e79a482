#pragma once
// Ground-truth solver for the integro-differential system: trajectory
// integration at fixed lambda, the characteristic function whose zeros are
// the eigenvalues, bracketed eigenvalue search, and nodal-point extraction.

#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nodal/model.hpp"
#include "nodal/numerics.hpp"

namespace nodal::forward {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Solution samples of one integration: phi1/phi2 have grid.size() entries and
// start exactly at (cos theta, -sin theta).
struct Trajectory {
    double lambda = 0.0;
    Grid grid;
    std::vector<double> phi1, phi2;
};

struct SpectrumEntry {
    int n = 0;              // eigenvalue index
    double lambda = 0.0;    // bisected root of the characteristic function
    double bracket_lo = 0.0, bracket_hi = 0.0;  // bracket that isolated it
    double residual = 0.0;  // |characteristic(lambda)| at the returned root
};

struct Spectrum {
    std::vector<SpectrumEntry> entries;  // sorted by n
    std::vector<int> missing;            // indices whose bracket never changed sign
};

struct NodeList {
    int n = 0;                  // eigenvalue index the nodes belong to
    std::vector<double> nodes;  // strictly increasing, inside (0, pi)
    bool count_matches = false; // nodes.size() == n
};

// Shared per-problem state (compiled kernel tape, coefficient samples at the
// propagator's quadrature points, diagonal kernel samples). One instance
// serves many lambda values; it is NOT safe for concurrent use — clone per
// worker instead (construction is cheap next to one integration).
class ForwardSolver {
public:
    explicit ForwardSolver(const model::Problem& prob);
    ~ForwardSolver();
    ForwardSolver(ForwardSolver&&) noexcept;
    ForwardSolver& operator=(ForwardSolver&&) noexcept;
    ForwardSolver(const ForwardSolver&) = delete;
    ForwardSolver& operator=(const ForwardSolver&) = delete;

    Trajectory integrate(double lambda);
    double characteristic(double lambda);
    const model::Coefficients& coefficients() const;
    const Grid& grid() const;
    double theta() const;
    // Largest |p| or |r| sample seen; used for step-resolution guards.
    double coefficient_bound() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot conveniences; each builds a private solver, so batch callers
// should hold a ForwardSolver instead.
Trajectory integrate(const model::Problem& prob, double lambda);
double characteristic(const model::Problem& prob, double lambda);

// Independent consistency check: evaluates the equivalent integral-equation
// form of the system on traj's own samples (trapezoid quadrature throughout)
// and returns the sup-norm mismatch of the two components.
std::pair<double, double> volterra_residual(const model::Problem& prob, const Trajectory& traj);

// Bracketed search around the second-order spectral prediction: half-width
// 0.4, widened once to 0.49, then recorded as missing. Bisection runs to tol.
Spectrum eigenvalues(const model::Problem& prob, int n_min, int n_max, double tol);

// Warm-start refinement: re-bisect inside [guess - half_width, guess + half_width].
// Throws NoSignChange if the characteristic does not change sign there.
double refine_eigenvalue(ForwardSolver& solver, double guess, double tol, double half_width);

// Zeros of the first component at lambda_n, located on the unwrapped phase of
// (phi1, phi2) and refined by bisection on a 4-point interpolant to tol.
NodeList nodes(const model::Problem& prob, double lambda_n, int n, double tol);
NodeList nodes_with_solver(ForwardSolver& solver, double lambda_n, int n, double tol);

}  // namespace nodal::forward
