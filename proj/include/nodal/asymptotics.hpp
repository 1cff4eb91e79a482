#pragma once
// Closed-form large-lambda expansions for the trajectory, the characteristic
// function, the eigenvalues, and the nodal points. These mirror the integral
// operators' first-order corrections and serve three purposes: validation
// targets for the integrator, bracket seeds for the eigenvalue search, and
// the analytic backbone of the nodal reconstruction.

#include <utility>

#include "nodal/model.hpp"

namespace nodal::asym {

// Everything the expansions consume: the derived coefficient bundle plus the
// boundary angle. Build with make_config to keep the two consistent.
struct AsymptoticConfig {
    model::Coefficients coeffs;
    double theta = 0.0;
};

AsymptoticConfig make_config(const model::Problem& prob);

// The order-1/n^3 term proportional to the constant A in the nodal expansion
// admits two sign conventions in circulation. `consistent` is the one obtained
// by expanding 1/lambda_n from the eigenvalue series term by term (and the one
// the integrator confirms); `sign_variant` flips that single term. The
// reporting CLI tabulates both so their divergence is visible.
enum class NodeSeries { consistent, sign_variant };

// First-order trajectory expansion at spectral parameter lambda != 0.
// Returns (phi1, phi2) with all five 1/(2 lambda) correction terms.
std::pair<double, double> phi_asym(const AsymptoticConfig& cfg, double lambda, double x);

// Boundary determinant expansion: the phi1 expansion at x = pi minus the
// nonlocal boundary term's leading contribution.
double char_asym(const AsymptoticConfig& cfg, double lambda);

// Eigenvalue expansion; n >= 1 uses the right-moving branch, n <= -1 the
// mirrored one. n must be nonzero.
double lambda_asym(const AsymptoticConfig& cfg, int n);

// Nodal-point expansion for the n-th trajectory's j-th sign change,
// 0 <= j < n. The implicit dependence on the node location (through the
// rotation mu and the cumulative combination b) is resolved by two fixed-point
// sweeps seeded at the equispaced leading term; the contraction factor is
// O(1/n), so two sweeps already exceed the series' own truncation accuracy.
double node_asym(const AsymptoticConfig& cfg, int n, int j,
                 NodeSeries variant = NodeSeries::consistent);

}  // namespace nodal::asym
