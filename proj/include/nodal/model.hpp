#pragma once
// Problem definition — boundary angle, potential diagonal, memory kernel,
// boundary weight — plus the derived coefficient functions every spectral and
// nodal formula downstream is written in.

#include <optional>
#include <string>
#include <vector>

#include "nodal/exprlang.hpp"
#include "nodal/numerics.hpp"

namespace nodal::model {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A scalar coefficient function, given either as a parsed expression or as
// uniform samples over [0, pi]. Sample form exists for functions of x only;
// kernel entries (functions of x and t) must be expressions, because the
// solver compiles them and a 2-D sample table would force O(N^2) storage for
// no accuracy gain.
class FunctionSpec {
public:
    FunctionSpec() = default;

    static FunctionSpec expression(const std::string& source, expr::Arity arity);
    static FunctionSpec expression(expr::Expr e);
    // Uniform samples over [0, pi]; needs at least 4 points for the cubic
    // interpolant. Always univariate.
    static FunctionSpec samples(std::vector<double> values);

    bool from_samples() const { return !expr_.has_value(); }
    expr::Arity arity() const;
    bool is_zero() const;  // structurally zero (constant-0 tree or all-zero samples)

    // The underlying expression; throws ModelError for sample-based specs.
    const expr::Expr& expression_ref() const;

    double operator()(double x) const;            // univariate value
    double operator()(double x, double t) const;  // bivariate value

    // Univariate resampling onto a grid (exact pointwise evaluation for
    // expressions, cubic interpolation for samples).
    SampledFunction resample(const Grid& grid) const;

private:
    std::optional<expr::Expr> expr_;
    std::vector<double> sample_xs_;  // implied uniform abscissae of samples_
    std::vector<double> samples_;
};

struct Problem {
    double theta = 0.0;   // boundary angle, 0 < theta < pi
    FunctionSpec p, r;    // diagonal potential entries on [0, pi]
    FunctionSpec m11, m12, m21, m22;  // kernel entries on 0 <= t <= x <= pi
    FunctionSpec omega;   // boundary weight on [0, pi]
    Grid grid;
};

// Structural checks: theta range, arities, expression-form kernels, and a
// coarse finite-evaluation sweep. Throws std::invalid_argument (theta) or
// ModelError / expr::DomainError (function problems).
void validate_problem(const Problem& prob);

struct Coefficients {
    SampledFunction mu;    // half the running integral of p + r
    SampledFunction v;     // (p - r)/2 pointwise
    SampledFunction bigK;  // running integral of m11 - m22 along the diagonal
    SampledFunction bigL;  // running integral of m12 - m21 along the diagonal
    SampledFunction b_fun; // v(0) sin 2theta + int_0^x v^2 - bigL(x)
    double a_const = 0.0;  // b_fun(pi) - 2 omega(pi)
    double omega_pi = 0.0;
    double d_const = 0.0;  // pi + 2 theta + 2 mu(pi)
};

// All fields are computed on prob.grid with the end-corrected running
// quadrature; evaluation failures carry grid-location context.
Coefficients derive_coefficients(const Problem& prob);

struct InversionReport {
    double mu_pi = 0.0;        // measured value of mu at pi
    bool mu_pi_ok = false;     // |mu_pi| <= tol
    double sin_two_theta = 0.0;
    bool theta_degenerate = false;  // |sin 2theta| < 0.1: v(0) formula unusable
    bool v_changes_sign = false;    // sign recovery ambiguous on interior flips
};

// Advisory-only preconditions for nodal reconstruction.
InversionReport validate_for_inversion(const Coefficients& coeffs, double tol);

}  // namespace nodal::model
