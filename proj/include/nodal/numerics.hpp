#pragma once
// Shared deterministic numerical kernels: quadrature, cumulative integration,
// finite differences, bisection, and sequence extrapolation. Everything here is
// pure and allocation-transparent; all higher modules build on these.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nodal {

inline constexpr double PI = 3.14159265358979323846264338327950288;

struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoSignChange : NumericsError {
    using NumericsError::NumericsError;
};

struct IllConditionedFit : NumericsError {
    using NumericsError::NumericsError;
};

// Uniform grid on [0, pi]: x_i = i*pi/N, with x_0 = 0 and x_N = pi pinned
// exactly (the last node is special-cased so rounding in i*h cannot move it).
struct Grid {
    int n_intervals = 0;
    double step = 0.0;

    Grid() = default;
    explicit Grid(int n) : n_intervals(n), step(PI / n) {
        if (n < 1) throw NumericsError("Grid: need at least one interval");
    }
    int size() const { return n_intervals + 1; }
    double x(int i) const { return i == n_intervals ? PI : i * step; }
    bool operator==(const Grid& o) const { return n_intervals == o.n_intervals; }
};

struct SampledFunction {
    Grid grid;
    std::vector<double> values;

    SampledFunction() = default;
    SampledFunction(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != grid.size())
            throw NumericsError("SampledFunction: length does not match grid");
    }
    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(values.size()); }
};

// Composite trapezoid over the full grid. Implemented as the final entry of the
// same running recurrence `cumulative` uses, so cumulative(f).back() equals
// trapezoid(f) bitwise.
double trapezoid(const SampledFunction& f);

// Running trapezoid integral: out[0] = 0, out[i] = out[i-1] + h*(f[i-1]+f[i])/2.
SampledFunction cumulative(const SampledFunction& f);

// Gregory end-corrected quadrature (difference corrections through order m at
// both ends; m chosen from the number of points available, up to 4, i.e. a
// 6th-order rule on long spans). Same recurrence discipline as above:
// gregory_total(f) == gregory_cumulative(f).back() bitwise.
double gregory_total(const SampledFunction& f);
SampledFunction gregory_cumulative(const SampledFunction& f);

// Net endpoint weight multipliers (relative to h) of the Gregory rule with
// difference corrections through order m, m in 0..4. Length m+1; the weight of
// point i from either end is h*w[i], interior points weigh h.
std::vector<double> gregory_end_weights(int m);

// Correction order the Gregory ladder picks for a span of `points` samples.
int gregory_order_for(int points);

// Second-order differentiation: central differences inside, one-sided
// three-point stencils at the ends.
SampledFunction central_diff(const SampledFunction& f);

// Deterministic bisection: exactly ceil(log2((b-a)/tol)) iterations.
double bisect(const std::function<double(double)>& fn, double a, double b, double tol);

struct FitDiagnostics {
    double cond = 0.0;          // 1-norm condition estimate of the scaled Gram matrix
    double residual_rms = 0.0;  // rms misfit of the least-squares model
};

// Least-squares fit value(n) ~ c0 + c1/n + ... + ck/n^k over the supplied
// pairs; returns c0. Throws IllConditionedFit when the scaled Gram condition
// estimate exceeds cond_bound.
double extrapolate(const std::vector<std::pair<int, double>>& pairs, int model_order,
                   FitDiagnostics* diag = nullptr, double cond_bound = 1e12);

// Generalized variant: fit value(n) ~ sum_j c_j n^{powers[j]} and return the
// coefficient of n^0 (powers must contain 0). Used by the staged nodal
// estimators, whose contamination terms grow like n and n^2.
double extrapolate_basis(const std::vector<double>& ns, const std::vector<double>& ys,
                         const std::vector<int>& powers, FitDiagnostics* diag = nullptr,
                         double cond_bound = 1e12);

// Dense polynomial least squares (ascending coefficients) and evaluation.
std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys, int deg);
double polyval(const std::vector<double>& coeffs, double x);

// Interpolate (xs, ys) at x with a 4-point Lagrange stencil (cubic in the
// interior, shrinking near the ends); clamped extrapolation uses the end
// stencil. xs must be strictly increasing.
double interp_cubic(const std::vector<double>& xs, const std::vector<double>& ys, double x);

// Uniform-grid specialization: same stencil selection and same arithmetic as
// the vector form evaluated on {grid.x(i)}, but with O(1) bracketing and no
// per-call allocation.
double interp_cubic(const SampledFunction& f, double x);

}  // namespace nodal
