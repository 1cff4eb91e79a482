#include "nodal/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace nodal::model {

FunctionSpec FunctionSpec::expression(const std::string& source, expr::Arity arity) {
    FunctionSpec f;
    f.expr_ = expr::Expr::parse(source, arity);
    return f;
}

FunctionSpec FunctionSpec::expression(expr::Expr e) {
    FunctionSpec f;
    f.expr_ = std::move(e);
    return f;
}

FunctionSpec FunctionSpec::samples(std::vector<double> values) {
    if (values.size() < 4)
        throw ModelError("sampled function needs at least 4 points on [0, pi]");
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw ModelError("sampled function has a non-finite value at index " +
                             std::to_string(i));
    FunctionSpec f;
    f.samples_ = std::move(values);
    const std::size_t m = f.samples_.size() - 1;
    f.sample_xs_.resize(f.samples_.size());
    for (std::size_t i = 0; i <= m; ++i)
        f.sample_xs_[i] =
            i == m ? PI : static_cast<double>(i) * (PI / static_cast<double>(m));
    return f;
}

expr::Arity FunctionSpec::arity() const {
    return expr_ ? expr_->arity() : expr::Arity::univariate;
}

bool FunctionSpec::is_zero() const {
    if (expr_) return expr_->is_zero();
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return v == 0.0; });
}

const expr::Expr& FunctionSpec::expression_ref() const {
    if (!expr_) throw ModelError("function is sample-based; no expression available");
    return *expr_;
}

double FunctionSpec::operator()(double x) const {
    if (expr_) return expr_->eval(x);
    return interp_cubic(sample_xs_, samples_, x);
}

double FunctionSpec::operator()(double x, double t) const {
    if (expr_) return expr_->eval(x, t);
    throw ModelError("sample-based functions are univariate; no (x,t) value");
}

SampledFunction FunctionSpec::resample(const Grid& grid) const {
    if (expr_) {
        if (expr_->arity() != expr::Arity::univariate)
            throw ModelError("cannot resample a kernel entry onto a 1-D grid");
        return expr::sample(*expr_, grid);
    }
    std::vector<double> out(static_cast<std::size_t>(grid.size()));
    if (samples_.size() == out.size()) {
        out = samples_;  // identical uniform grid: exact copy, no interpolation
    } else {
        for (int i = 0; i < grid.size(); ++i)
            out[static_cast<std::size_t>(i)] = interp_cubic(sample_xs_, samples_, grid.x(i));
    }
    return SampledFunction(grid, std::move(out));
}

namespace {

void check_univariate(const FunctionSpec& f, const char* name) {
    if (f.arity() != expr::Arity::univariate)
        throw ModelError(std::string(name) + " must be a function of x only");
}

void check_kernel(const FunctionSpec& f, const char* name) {
    if (f.from_samples())
        throw ModelError(std::string(name) +
                         " is a kernel entry and must be given as an expression of (x, t); "
                         "sampled kernels are not supported");
    if (f.arity() != expr::Arity::bivariate)
        throw ModelError(std::string(name) + " must be parsed as a bivariate expression");
}

double eval_diag(const FunctionSpec& f, double x, const char* name, int i) {
    try {
        return f(x, x);
    } catch (const ModelError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelError(std::string(name) + "(t,t) failed at grid index " + std::to_string(i) +
                         ": " + e.what());
    }
}

}  // namespace

void validate_problem(const Problem& prob) {
    if (!(prob.theta > 0.0 && prob.theta < PI))
        throw std::invalid_argument("theta must satisfy 0 < theta < pi");
    if (prob.grid.n_intervals < 8)
        throw std::invalid_argument("grid needs at least 8 intervals");
    check_univariate(prob.p, "p");
    check_univariate(prob.r, "r");
    check_univariate(prob.omega, "omega");
    check_kernel(prob.m11, "m11");
    check_kernel(prob.m12, "m12");
    check_kernel(prob.m21, "m21");
    check_kernel(prob.m22, "m22");

    // Finite-evaluation sweep: the x-only functions over the full grid, the
    // kernel entries over a coarse lattice of the triangle t <= x.
    (void)prob.p.resample(prob.grid);
    (void)prob.r.resample(prob.grid);
    (void)prob.omega.resample(prob.grid);
    const int nc = 32;
    const FunctionSpec* kernels[4] = {&prob.m11, &prob.m12, &prob.m21, &prob.m22};
    const char* names[4] = {"m11", "m12", "m21", "m22"};
    for (int k = 0; k < 4; ++k) {
        if (kernels[k]->is_zero()) continue;
        for (int i = 0; i <= nc; ++i) {
            double x = i == nc ? PI : i * (PI / nc);
            for (int j = 0; j <= i; ++j) {
                double t = j == nc ? PI : j * (PI / nc);
                double val;
                try {
                    val = (*kernels[k])(x, t);
                } catch (const std::exception& e) {
                    throw ModelError(std::string(names[k]) + " failed at x=" + std::to_string(x) +
                                     ", t=" + std::to_string(t) + ": " + e.what());
                }
                if (!std::isfinite(val))
                    throw ModelError(std::string(names[k]) + " is non-finite at x=" +
                                     std::to_string(x) + ", t=" + std::to_string(t));
            }
        }
    }
}

Coefficients derive_coefficients(const Problem& prob) {
    const Grid& g = prob.grid;
    const int n = g.size();

    SampledFunction pv = prob.p.resample(g);
    SampledFunction rv = prob.r.resample(g);
    std::vector<double> half_sum(static_cast<std::size_t>(n)), half_diff(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        half_sum[static_cast<std::size_t>(i)] = 0.5 * (pv[i] + rv[i]);
        half_diff[static_cast<std::size_t>(i)] = 0.5 * (pv[i] - rv[i]);
    }

    Coefficients c;
    c.mu = gregory_cumulative(SampledFunction(g, std::move(half_sum)));
    c.v = SampledFunction(g, std::move(half_diff));

    auto diag_difference = [&](const FunctionSpec& a, const FunctionSpec& b, const char* an,
                               const char* bn) {
        std::vector<double> d(static_cast<std::size_t>(n));
        const bool az = a.is_zero(), bz = b.is_zero();
        for (int i = 0; i < n; ++i) {
            const double x = g.x(i);
            const double va = az ? 0.0 : eval_diag(a, x, an, i);
            const double vb = bz ? 0.0 : eval_diag(b, x, bn, i);
            d[static_cast<std::size_t>(i)] = va - vb;
        }
        return SampledFunction(g, std::move(d));
    };
    c.bigK = gregory_cumulative(diag_difference(prob.m11, prob.m22, "m11", "m22"));
    c.bigL = gregory_cumulative(diag_difference(prob.m12, prob.m21, "m12", "m21"));

    std::vector<double> vsq(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) vsq[static_cast<std::size_t>(i)] = c.v[i] * c.v[i];
    SampledFunction vsq_cum = gregory_cumulative(SampledFunction(g, std::move(vsq)));

    const double v0_sin = c.v[0] * std::sin(2.0 * prob.theta);
    std::vector<double> b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        b[static_cast<std::size_t>(i)] = v0_sin + vsq_cum[i] - c.bigL[i];
    c.b_fun = SampledFunction(g, std::move(b));

    c.omega_pi = prob.omega(PI);
    c.a_const = c.b_fun.values.back() - 2.0 * c.omega_pi;
    c.d_const = PI + 2.0 * prob.theta + 2.0 * c.mu.values.back();
    return c;
}

InversionReport validate_for_inversion(const Coefficients& coeffs, double tol) {
    InversionReport rep;
    rep.mu_pi = coeffs.mu.values.back();
    rep.mu_pi_ok = std::fabs(rep.mu_pi) <= tol;
    // theta is recoverable from the stored constants: d = pi + 2 theta + 2 mu(pi)
    const double theta = 0.5 * (coeffs.d_const - PI - 2.0 * rep.mu_pi);
    rep.sin_two_theta = std::sin(2.0 * theta);
    rep.theta_degenerate = std::fabs(rep.sin_two_theta) < 0.1;
    double lo = coeffs.v.values.empty() ? 0.0 : coeffs.v.values[0];
    double hi = lo;
    for (double x : coeffs.v.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    rep.v_changes_sign = lo < -1e-12 && hi > 1e-12;
    return rep;
}

}  // namespace nodal::model
