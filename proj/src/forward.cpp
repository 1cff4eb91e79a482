#include "nodal/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nodal/kern.hpp"

namespace nodal::forward {

namespace {

const double kSqrt3 = std::sqrt(3.0);

struct Mat2 {
    double a11, a12, a21, a22;
};

// exp of the traceless generator [[d, -alpha],[beta, -d]]: eigenvalues are
// +-s with s^2 = d^2 - alpha*beta, so the trig branch applies when s^2 < 0.
// Both branch functions share the series limit 1 + w/6 near w = 0.
Mat2 exp_traceless(double d, double alpha, double beta) {
    const double w = d * d - alpha * beta;
    double c, sl;
    if (std::fabs(w) < 1e-16) {
        c = 1.0 + 0.5 * w;
        sl = 1.0 + w / 6.0;
    } else if (w < 0.0) {
        const double eta = std::sqrt(-w);
        c = std::cos(eta);
        sl = std::sin(eta) / eta;
    } else {
        const double sig = std::sqrt(w);
        c = std::cosh(sig);
        sl = std::sinh(sig) / sig;
    }
    return {c + sl * d, -sl * alpha, sl * beta, c - sl * d};
}

}  // namespace

struct ForwardSolver::Impl {
    double theta = 0.0;
    Grid grid;
    model::Coefficients coeffs;

    // lambda-independent samples
    std::vector<double> p_g1, p_g2, r_g1, r_g2;  // potential at the step's two Gauss points
    std::vector<double> jm11, jm12, jm21, jm22;  // rows of J*M(x,x) at grid points
    std::vector<double> omega_s;                 // boundary weight samples (empty when zero)
    std::vector<double> ew[5];                   // end-weight tables, order 0..4
    std::vector<double> weights;                 // per-step history multipliers
    std::unique_ptr<kern::KernelTape> tape;
    bool mem_zero = true;
    double max_coeff = 0.0;

    explicit Impl(const model::Problem& prob)
        : theta(prob.theta), grid(prob.grid), coeffs(model::derive_coefficients(prob)) {
        model::validate_problem(prob);
        const int n = grid.n_intervals;
        const double h = grid.step;
        const double c1 = 0.5 - kSqrt3 / 6.0, c2 = 0.5 + kSqrt3 / 6.0;
        p_g1.resize(static_cast<size_t>(n));
        p_g2.resize(static_cast<size_t>(n));
        r_g1.resize(static_cast<size_t>(n));
        r_g2.resize(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double x0 = grid.x(k);
            const auto ks = static_cast<size_t>(k);
            p_g1[ks] = prob.p(x0 + h * c1);
            p_g2[ks] = prob.p(x0 + h * c2);
            r_g1[ks] = prob.r(x0 + h * c1);
            r_g2[ks] = prob.r(x0 + h * c2);
            max_coeff = std::max({max_coeff, std::fabs(p_g1[ks]), std::fabs(p_g2[ks]),
                                  std::fabs(r_g1[ks]), std::fabs(r_g2[ks])});
        }

        const size_t pts = static_cast<size_t>(grid.size());
        jm11.resize(pts);
        jm12.resize(pts);
        jm21.resize(pts);
        jm22.resize(pts);
        const bool z11 = prob.m11.is_zero(), z12 = prob.m12.is_zero();
        const bool z21 = prob.m21.is_zero(), z22 = prob.m22.is_zero();
        for (int i = 0; i < grid.size(); ++i) {
            const double x = grid.x(i);
            const auto is = static_cast<size_t>(i);
            jm11[is] = z21 ? 0.0 : prob.m21(x, x);
            jm12[is] = z22 ? 0.0 : prob.m22(x, x);
            jm21[is] = z11 ? 0.0 : -prob.m11(x, x);
            jm22[is] = z12 ? 0.0 : -prob.m12(x, x);
        }

        if (!prob.omega.is_zero()) omega_s = prob.omega.resample(grid).values;

        std::vector<double> tgrid(pts);
        for (int i = 0; i < grid.size(); ++i) tgrid[static_cast<size_t>(i)] = grid.x(i);
        tape = std::make_unique<kern::KernelTape>(
            prob.m11.expression_ref(), prob.m12.expression_ref(), prob.m21.expression_ref(),
            prob.m22.expression_ref(), std::move(tgrid));
        mem_zero = tape->all_zero();

        for (int m = 0; m <= 4; ++m) ew[m] = gregory_end_weights(m);
        weights.assign(pts, 1.0);
    }

    // History multipliers for step k: entries 0..k of the end-corrected rule
    // over the k+2 points 0..k+1 (the implicit point k+1 is split off).
    void weights_full(int k, int m) {
        for (int i = 0; i <= k; ++i) weights[static_cast<size_t>(i)] = 1.0;
        for (int j = 0; j <= m && j <= k; ++j) weights[static_cast<size_t>(j)] = ew[m][static_cast<size_t>(j)];
        for (int j = 1; j <= m; ++j)
            weights[static_cast<size_t>(k + 1 - j)] = ew[m][static_cast<size_t>(j)];
    }
    void weights_shift(int k, int m) {
        for (int j = 1; j <= m; ++j) weights[static_cast<size_t>(k - j)] = 1.0;
        for (int j = 1; j <= m; ++j)
            weights[static_cast<size_t>(k + 1 - j)] = ew[m][static_cast<size_t>(j)];
    }

    Trajectory integrate(double lambda) {
        if (!std::isfinite(lambda)) throw SolverError("lambda must be finite");
        const int n = grid.n_intervals;
        const double h = grid.step;
        Trajectory traj;
        traj.lambda = lambda;
        traj.grid = grid;
        traj.phi1.resize(static_cast<size_t>(n) + 1);
        traj.phi2.resize(static_cast<size_t>(n) + 1);
        traj.phi1[0] = std::cos(theta);
        traj.phi2[0] = -std::sin(theta);

        double f1 = 0.0, f2 = 0.0;  // memory forcing at x_k (zero at x_0)
        int last_m = -1;
        if (!mem_zero) std::fill(weights.begin(), weights.end(), 1.0);

        for (int k = 0; k < n; ++k) {
            const auto ks = static_cast<size_t>(k);
            const double a1 = lambda - r_g1[ks], a2 = lambda - r_g2[ks];
            const double b1 = lambda - p_g1[ks], b2 = lambda - p_g2[ks];
            const double alpha = 0.5 * h * (a1 + a2);
            const double beta = 0.5 * h * (b1 + b2);
            const double dcom = kSqrt3 * h * h / 12.0 * (a1 * b2 - a2 * b1);
            const Mat2 e = exp_traceless(dcom, alpha, beta);

            const double y1 = traj.phi1[ks], y2 = traj.phi2[ks];
            double rhs1 = e.a11 * y1 + e.a12 * y2;
            double rhs2 = e.a21 * y1 + e.a22 * y2;

            if (mem_zero) {
                traj.phi1[ks + 1] = rhs1;
                traj.phi2[ks + 1] = rhs2;
            } else {
                rhs1 += 0.5 * h * (e.a11 * f1 + e.a12 * f2);
                rhs2 += 0.5 * h * (e.a21 * f1 + e.a22 * f2);

                const int m = gregory_order_for(k + 2);
                if (m != last_m) {
                    weights_full(k, m);
                    last_m = m;
                } else {
                    weights_shift(k, m);
                }
                const double xk1 = grid.x(k + 1);
                const auto mem = tape->accumulate(xk1, ks + 1, weights.data(),
                                                  traj.phi1.data(), traj.phi2.data());
                const double js1 = h * mem.i2;   // J * S, with S = h * history sum
                const double js2 = -h * mem.i1;
                rhs1 += 0.5 * h * js1;
                rhs2 += 0.5 * h * js2;

                const double wend = ew[m][0];
                const double cimp = 0.5 * h * h * wend;
                const double g11 = 1.0 - cimp * jm11[ks + 1];
                const double g12 = -cimp * jm12[ks + 1];
                const double g21 = -cimp * jm21[ks + 1];
                const double g22 = 1.0 - cimp * jm22[ks + 1];
                const double det = g11 * g22 - g12 * g21;
                if (std::fabs(det) < 1e-8)
                    throw SolverError("step matrix is nearly singular; increase grid_n");
                const double z1 = (g22 * rhs1 - g12 * rhs2) / det;
                const double z2 = (g11 * rhs2 - g21 * rhs1) / det;
                traj.phi1[ks + 1] = z1;
                traj.phi2[ks + 1] = z2;

                const double hw = h * wend;
                f1 = js1 + hw * (jm11[ks + 1] * z1 + jm12[ks + 1] * z2);
                f2 = js2 + hw * (jm21[ks + 1] * z1 + jm22[ks + 1] * z2);
            }
            if (!std::isfinite(traj.phi1[ks + 1]) || !std::isfinite(traj.phi2[ks + 1]))
                throw SolverError("trajectory became non-finite near x=" +
                                  std::to_string(grid.x(k + 1)) + "; increase grid_n");
        }
        return traj;
    }

    double characteristic(double lambda) {
        Trajectory traj = integrate(lambda);
        double boundary = traj.phi1.back();
        if (!omega_s.empty()) {
            std::vector<double> prod(traj.phi1.size());
            for (size_t i = 0; i < prod.size(); ++i) prod[i] = traj.phi1[i] * omega_s[i];
            boundary -= gregory_total(SampledFunction(grid, std::move(prod)));
        }
        return boundary;
    }
};

ForwardSolver::ForwardSolver(const model::Problem& prob) : impl_(std::make_unique<Impl>(prob)) {}
ForwardSolver::~ForwardSolver() = default;
ForwardSolver::ForwardSolver(ForwardSolver&&) noexcept = default;
ForwardSolver& ForwardSolver::operator=(ForwardSolver&&) noexcept = default;

Trajectory ForwardSolver::integrate(double lambda) { return impl_->integrate(lambda); }
double ForwardSolver::characteristic(double lambda) { return impl_->characteristic(lambda); }
const model::Coefficients& ForwardSolver::coefficients() const { return impl_->coeffs; }
const Grid& ForwardSolver::grid() const { return impl_->grid; }
double ForwardSolver::theta() const { return impl_->theta; }
double ForwardSolver::coefficient_bound() const { return impl_->max_coeff; }

Trajectory integrate(const model::Problem& prob, double lambda) {
    return ForwardSolver(prob).integrate(lambda);
}

double characteristic(const model::Problem& prob, double lambda) {
    return ForwardSolver(prob).characteristic(lambda);
}

std::pair<double, double> volterra_residual(const model::Problem& prob, const Trajectory& traj) {
    if (!(traj.grid == prob.grid))
        throw SolverError("trajectory grid does not match the problem grid");
    const int n = prob.grid.n_intervals;
    const double h = prob.grid.step;
    const double lambda = traj.lambda;
    const double theta = prob.theta;
    const size_t pts = static_cast<size_t>(n) + 1;

    const SampledFunction p_s = prob.p.resample(prob.grid);
    const SampledFunction r_s = prob.r.resample(prob.grid);

    std::vector<double> tgrid(pts);
    for (int i = 0; i <= n; ++i) tgrid[static_cast<size_t>(i)] = prob.grid.x(i);
    kern::KernelTape tape(prob.m11.expression_ref(), prob.m12.expression_ref(),
                          prob.m21.expression_ref(), prob.m22.expression_ref(), tgrid);

    // inner memory integrals at every grid point (trapezoid over the prefix)
    std::vector<double> inner1(pts, 0.0), inner2(pts, 0.0);
    std::vector<double> wtrap(pts, 1.0);
    wtrap[0] = 0.5;
    if (!tape.all_zero()) {
        for (int k = 1; k <= n; ++k) {
            const auto ks = static_cast<size_t>(k);
            wtrap[ks] = 0.5;
            const auto mem = tape.accumulate(prob.grid.x(k), ks + 1, wtrap.data(),
                                             traj.phi1.data(), traj.phi2.data());
            wtrap[ks] = 1.0;
            inner1[ks] = h * mem.i1;
            inner2[ks] = h * mem.i2;
        }
    }

    std::vector<double> gc(pts), gs(pts);
    for (size_t i = 0; i < pts; ++i) {
        gc[i] = r_s.values[i] * traj.phi2[i] + inner2[i];
        gs[i] = p_s.values[i] * traj.phi1[i] + inner1[i];
    }

    const kern::Kernels& kk = kern::kernels();
    std::vector<double> args(pts), carr(pts), sarr(pts);
    double sup1 = std::fabs(traj.phi1[0] - std::cos(-theta));
    double sup2 = std::fabs(traj.phi2[0] - std::sin(-theta));
    for (int i = 1; i <= n; ++i) {
        const auto is = static_cast<size_t>(i);
        const double xi = prob.grid.x(i);
        for (size_t k = 0; k <= is; ++k) args[k] = lambda * (xi - tgrid[k]);
        kk.sincos_array(args.data(), sarr.data(), carr.data(), is + 1);
        wtrap[is] = 0.5;
        const double quad1 =
            h * (kk.dot3(wtrap.data(), carr.data(), gc.data(), is + 1) +
                 kk.dot3(wtrap.data(), sarr.data(), gs.data(), is + 1));
        const double quad2 =
            h * (kk.dot3(wtrap.data(), sarr.data(), gc.data(), is + 1) -
                 kk.dot3(wtrap.data(), carr.data(), gs.data(), is + 1));
        wtrap[is] = 1.0;
        sup1 = std::max(sup1, std::fabs(traj.phi1[is] - std::cos(lambda * xi - theta) - quad1));
        sup2 = std::max(sup2, std::fabs(traj.phi2[is] - std::sin(lambda * xi - theta) - quad2));
    }
    return {sup1, sup2};
}

namespace {

double bracket_center(const model::Coefficients& coeffs, double theta, int n) {
    const double mu_pi = coeffs.mu.values.back();
    return n + 0.5 + (theta + mu_pi) / PI + coeffs.a_const / (2.0 * PI * n);
}

}  // namespace

Spectrum eigenvalues(const model::Problem& prob, int n_min, int n_max, double tol) {
    if (n_min < 1 || n_max < n_min) throw SolverError("need 1 <= n_min <= n_max");
    if (!(tol > 0.0)) throw SolverError("tolerance must be positive");
    ForwardSolver solver(prob);
    Spectrum spec;
    for (int n = n_min; n <= n_max; ++n) {
        const double center = bracket_center(solver.coefficients(), solver.theta(), n);
        bool found = false;
        for (double w : {0.4, 0.49}) {
            const double lo = center - w, hi = center + w;
            const double flo = solver.characteristic(lo);
            const double fhi = solver.characteristic(hi);
            double root;
            if (flo == 0.0)
                root = lo;
            else if (fhi == 0.0)
                root = hi;
            else if (flo * fhi < 0.0)
                root = bisect([&](double lam) { return solver.characteristic(lam); }, lo, hi, tol);
            else
                continue;
            spec.entries.push_back(
                {n, root, lo, hi, std::fabs(solver.characteristic(root))});
            found = true;
            break;
        }
        if (!found) spec.missing.push_back(n);
    }
    return spec;
}

double refine_eigenvalue(ForwardSolver& solver, double guess, double tol, double half_width) {
    const double lo = guess - half_width, hi = guess + half_width;
    const double flo = solver.characteristic(lo);
    const double fhi = solver.characteristic(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0)
        throw NoSignChange("no sign change around the eigenvalue guess " + std::to_string(guess));
    return bisect([&](double lam) { return solver.characteristic(lam); }, lo, hi, tol);
}

NodeList nodes_with_solver(ForwardSolver& solver, double lambda_n, int n, double tol) {
    const Grid& grid = solver.grid();
    const double h = grid.step;
    if (h * (std::fabs(lambda_n) + solver.coefficient_bound()) >= 2.5)
        throw SolverError("grid too coarse to resolve the oscillation at lambda=" +
                          std::to_string(lambda_n) + "; increase grid_n");
    const Trajectory traj = solver.integrate(lambda_n);
    const int npts = grid.size();

    // Unwrapped rotation phase of (phi1, phi2); the first component vanishes
    // exactly at phase levels (k + 1/2)*pi.
    std::vector<double> phase(static_cast<size_t>(npts)), xs(static_cast<size_t>(npts));
    double prev_raw = std::atan2(traj.phi2[0], traj.phi1[0]);
    phase[0] = prev_raw;
    xs[0] = 0.0;
    for (int i = 1; i < npts; ++i) {
        const auto is = static_cast<size_t>(i);
        const double raw = std::atan2(traj.phi2[is], traj.phi1[is]);
        double d = raw - prev_raw;
        while (d > PI) d -= 2.0 * PI;
        while (d < -PI) d += 2.0 * PI;
        phase[is] = phase[is - 1] + d;
        prev_raw = raw;
        xs[is] = grid.x(i);
    }

    std::vector<double> found;
    for (int i = 0; i + 1 < npts; ++i) {
        const auto is = static_cast<size_t>(i);
        const double lo = std::min(phase[is], phase[is + 1]);
        const double hi = std::max(phase[is], phase[is + 1]);
        const long kmin = static_cast<long>(std::ceil(lo / PI - 0.5));
        const long kmax = static_cast<long>(std::floor(hi / PI - 0.5));
        for (long k = kmin; k <= kmax; ++k) {
            const double level = (static_cast<double>(k) + 0.5) * PI;
            if (level < lo || level > hi) continue;
            double root;
            if (phase[is] == level) {
                root = xs[is];
            } else if (phase[is + 1] == level) {
                continue;  // owned by the next interval's left endpoint
            } else {
                root = bisect(
                    [&](double x) { return interp_cubic(xs, phase, x) - level; },
                    xs[is], xs[is + 1], tol);
            }
            found.push_back(root);
        }
    }
    // last grid point: a level hit exactly at pi would land outside (0, pi) anyway
    std::sort(found.begin(), found.end());

    NodeList out;
    out.n = n;
    for (double x : found) {
        if (x <= 0.5 * h || x >= PI - 0.5 * h) continue;
        if (!out.nodes.empty() && x - out.nodes.back() < 1e-12) continue;
        out.nodes.push_back(x);
    }
    out.count_matches = out.nodes.size() == static_cast<size_t>(n);
    return out;
}

NodeList nodes(const model::Problem& prob, double lambda_n, int n, double tol) {
    ForwardSolver solver(prob);
    return nodes_with_solver(solver, lambda_n, n, tol);
}

}  // namespace nodal::forward
