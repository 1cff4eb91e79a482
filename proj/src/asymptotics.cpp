#include "nodal/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nodal/numerics.hpp"

namespace nodal::asym {

namespace {

// Shared term assembly for the trajectory expansion, with every coefficient
// evaluated by the caller (interpolated for interior x, exact endpoint samples
// for the boundary determinant so the two stay identical at x = pi).
std::pair<double, double> phi_terms(double theta, double lambda, double x, double mu_x,
                                    double v_x, double k_x, double l_x, double vsq_x,
                                    double v0) {
    const double psi = lambda * x - mu_x - theta;    // rotating phase
    const double psi_r = lambda * x - mu_x + theta;  // phase with reflected angle
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double half = 1.0 / (2.0 * lambda);
    const double amp_v = v_x;     // local amplitude correction
    const double amp_v0 = v0;     // boundary amplitude correction (reflected phase)
    const double quad_vsq = vsq_x;  // cumulative square term, rotates the phase
    const double quad_k = k_x;      // diagonal-kernel cumulative, in-phase
    const double quad_l = l_x;      // off-diagonal cumulative, quadrature-phase
    const double phi1 = cp + half * (amp_v * cp - amp_v0 * std::cos(psi_r) + quad_vsq * sp -
                                     quad_k * cp - quad_l * sp);
    const double phi2 = sp + half * (-amp_v * sp - amp_v0 * std::sin(psi_r) - quad_vsq * cp -
                                     quad_k * sp + quad_l * cp);
    return {phi1, phi2};
}

double require_nonzero(double lambda, const char* who) {
    if (lambda == 0.0 || std::isnan(lambda))
        throw std::invalid_argument(std::string(who) + ": lambda must be nonzero");
    return lambda;
}

}  // namespace

AsymptoticConfig make_config(const model::Problem& prob) {
    return AsymptoticConfig{model::derive_coefficients(prob), prob.theta};
}

std::pair<double, double> phi_asym(const AsymptoticConfig& cfg, double lambda, double x) {
    require_nonzero(lambda, "phi_asym");
    const auto& c = cfg.coeffs;
    const double mu_x = interp_cubic(c.mu, x);
    const double v_x = interp_cubic(c.v, x);
    const double k_x = interp_cubic(c.bigK, x);
    const double l_x = interp_cubic(c.bigL, x);
    // cumulative square of v, reassembled from the b-combination: b already
    // carries v(0)-angle and l contributions, both of which vanish at x = 0
    const double vsq_x = interp_cubic(c.b_fun, x) + l_x - c.b_fun.values.front();
    return phi_terms(cfg.theta, lambda, x, mu_x, v_x, k_x, l_x, vsq_x, c.v.values.front());
}

double char_asym(const AsymptoticConfig& cfg, double lambda) {
    require_nonzero(lambda, "char_asym");
    const auto& c = cfg.coeffs;
    const double mu_pi = c.mu.values.back();
    const double l_pi = c.bigL.values.back();
    const double vsq_pi = c.b_fun.values.back() + l_pi - c.b_fun.values.front();
    const auto phi = phi_terms(cfg.theta, lambda, PI, mu_pi, c.v.values.back(),
                               c.bigK.values.back(), l_pi, vsq_pi, c.v.values.front());
    const double psi_pi = lambda * PI - mu_pi - cfg.theta;
    return phi.first - std::sin(psi_pi) * c.omega_pi / lambda;
}

double lambda_asym(const AsymptoticConfig& cfg, int n) {
    if (n == 0) throw std::invalid_argument("lambda_asym: n must be nonzero");
    const double base = (cfg.theta + cfg.coeffs.mu.values.back()) / PI;
    const double corr = cfg.coeffs.a_const / (2.0 * n * PI);
    return n >= 1 ? (n + 0.5) + base + corr : (n - 0.5) + base - corr;
}

double node_asym(const AsymptoticConfig& cfg, int n, int j, NodeSeries variant) {
    if (n < 1) throw std::invalid_argument("node_asym: n must be >= 1");
    if (j < 0 || j >= n) throw std::out_of_range("node_asym: j out of range [0, n)");
    const auto& c = cfg.coeffs;
    const double nn = n;
    const double s = (j + 0.5) * PI / nn;              // equispaced leading term
    const double shrink = c.d_const / (2.0 * nn * PI);  // first 1/lambda_n correction
    const double shrink_sq = shrink * shrink;
    const double a_scale = c.a_const / (2.0 * nn * nn * PI);
    double x = s;
    for (int sweep = 0; sweep < 2; ++sweep) {
        const double xc = std::clamp(x, 0.0, PI);
        const double m = (interp_cubic(c.mu, xc) + cfg.theta) / nn;
        const double b_x = interp_cubic(c.b_fun, xc);
        const double a_term = variant == NodeSeries::consistent ? -(s + m) * a_scale
                                                                : (s - m) * a_scale;
        x = (s + m) * (1.0 - shrink + shrink_sq) + a_term + b_x / (2.0 * nn * nn);
    }
    return x;
}

}  // namespace nodal::asym
