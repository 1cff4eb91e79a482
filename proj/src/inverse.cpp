#include "nodal/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace nodal::inverse {

namespace {

void check_level(int n, const std::vector<double>& nodes) {
    const auto tag = [n](const std::string& what) {
        return "nodal set, n = " + std::to_string(n) + ": " + what;
    };
    if (n < 1) throw InverseError(tag("level index must be positive"));
    if (static_cast<int>(nodes.size()) != n)
        throw InverseError(tag("expected exactly n nodes, got " +
                               std::to_string(nodes.size())));
    for (int j = 0; j < n; ++j) {
        const double x = nodes[static_cast<size_t>(j)];
        if (!(x > 0.0 && x < PI))
            throw InverseError(tag("node " + std::to_string(j) + " outside (0, pi)"));
        if (j > 0 && !(x > nodes[static_cast<size_t>(j - 1)]))
            throw InverseError(tag("nodes not strictly increasing at " + std::to_string(j)));
    }
}

// Resolve and sanity-check the requested levels; returns them sorted and
// deduplicated so the sequence fits accumulate in a fixed order.
std::vector<int> checked_levels(const NodalSet& set, const std::vector<int>& n_list,
                                size_t min_levels, int min_nodes) {
    std::vector<int> ns = n_list;
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    if (ns.size() < min_levels)
        throw InverseError("need at least " + std::to_string(min_levels) +
                           " distinct n values, got " + std::to_string(ns.size()));
    for (int n : ns) {
        auto it = set.entries.find(n);
        if (it == set.entries.end())
            throw InverseError("nodal set has no entry for n = " + std::to_string(n));
        check_level(n, it->second);
        if (n < min_nodes)
            throw InverseError("n = " + std::to_string(n) + " has too few nodes for this stage");
    }
    return ns;
}

// Second-order first derivative on uniform samples: central differences
// inside, one-sided three-point stencils at the ends (same stencils as the
// full-interval central_diff).
std::vector<double> gradient(const std::vector<double>& y, double h) {
    const int n = static_cast<int>(y.size());
    if (n < 3) throw InverseError("gradient: need at least three samples");
    std::vector<double> d(y.size());
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    for (int i = 1; i + 1 < n; ++i)
        d[static_cast<size_t>(i)] = (y[static_cast<size_t>(i + 1)] - y[static_cast<size_t>(i - 1)]) / (2.0 * h);
    d[static_cast<size_t>(n - 1)] = (3.0 * y[static_cast<size_t>(n - 1)] - 4.0 * y[static_cast<size_t>(n - 2)] +
                                     y[static_cast<size_t>(n - 3)]) / (2.0 * h);
    return d;
}

// Quadratic extrapolation of a curve to a point outside its grid, through the
// three grid points nearest the target end.
double quad_extrap(const Curve& c, double target) {
    if (c.size() < 3) throw InverseError("quad_extrap: need at least three samples");
    const int m = c.size();
    const int base = target > 0.5 * (c.grid.lo + c.grid.hi) ? m - 3 : 0;
    std::vector<double> xs(3), ys(3);
    for (int i = 0; i < 3; ++i) {
        xs[static_cast<size_t>(i)] = c.grid.x(base + i);
        ys[static_cast<size_t>(i)] = c[base + i];
    }
    return polyval(polyfit(xs, ys, 2), target);
}

// Linear blend of per-node values between the two nodes bracketing x; beyond
// the first or last gap the blend extrapolates linearly.
double blend_at(const std::vector<double>& nodes, const std::vector<double>& vals, double x) {
    const int n = static_cast<int>(nodes.size());
    const int k = static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), x) - nodes.begin());
    int j0 = k - 1, j1 = k;
    if (k == 0) {
        j0 = 0;
        j1 = 1;
    } else if (k == n) {
        j0 = n - 2;
        j1 = n - 1;
    }
    const double x0 = nodes[static_cast<size_t>(j0)];
    const double x1 = nodes[static_cast<size_t>(j1)];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * vals[static_cast<size_t>(j0)] + w * vals[static_cast<size_t>(j1)];
}

Curve make_curve(const InversionGrid& grid, bool with_rms) {
    Curve c;
    c.grid = grid;
    c.values.assign(static_cast<size_t>(grid.points), 0.0);
    if (with_rms) c.fit_rms.assign(static_cast<size_t>(grid.points), 0.0);
    return c;
}

void check_curve(const Curve& c, const char* who) {
    if (c.grid.points < 4 || c.size() != c.grid.points)
        throw InverseError(std::string(who) + ": curve does not match its grid");
}

}  // namespace

std::vector<double> InversionGrid::abscissae() const {
    std::vector<double> xs(static_cast<size_t>(points));
    for (int i = 0; i < points; ++i) xs[static_cast<size_t>(i)] = x(i);
    return xs;
}

double Curve::at(double x) const {
    const int n = size();
    if (n < 2 || n != grid.points) throw InverseError("Curve::at: bad sizes");
    const double h = grid.step();
    // First index k with grid.x(k) >= x, matching lower_bound on the sampled
    // abscissae; the ceil guess is off by at most one ulp-induced step.
    const double guess = std::ceil((x - grid.lo) / h);
    int k = (guess != guess) ? 0
                             : static_cast<int>(std::clamp(guess, 0.0, static_cast<double>(n)));
    while (k > 0 && grid.x(k - 1) >= x) --k;
    while (k < n && grid.x(k) < x) ++k;
    k = std::clamp(k, 1, n - 1);
    const int lo = std::clamp(k - 2, 0, std::max(0, n - 4));
    const int hi = std::min(lo + 4, n);
    double out = 0.0;
    for (int i = lo; i < hi; ++i) {
        double basis = 1.0;
        for (int j = lo; j < hi; ++j) {
            if (j == i) continue;
            basis *= (x - grid.x(j)) / (grid.x(i) - grid.x(j));
        }
        out += basis * values[static_cast<size_t>(i)];
    }
    return out;
}

void validate(const NodalSet& set) {
    for (const auto& [n, nodes] : set.entries) check_level(n, nodes);
}

std::pair<int, double> select_nodes(const NodalSet& set, double x, int n) {
    auto it = set.entries.find(n);
    if (it == set.entries.end())
        throw InverseError("nodal set has no entry for n = " + std::to_string(n));
    const std::vector<double>& nodes = it->second;
    if (nodes.empty()) throw InverseError("nodal set entry for n = " + std::to_string(n) + " is empty");
    int best = 0;
    double best_dist = std::abs(nodes[0] - x);
    for (int j = 1; j < static_cast<int>(nodes.size()); ++j) {
        const double dist = std::abs(nodes[static_cast<size_t>(j)] - x);
        if (dist < best_dist) {
            best_dist = dist;
            best = j;
        }
    }
    return {best, nodes[static_cast<size_t>(best)]};
}

double estimate_theta(const NodalSet& set, const std::vector<int>& n_list) {
    const std::vector<int> ns = checked_levels(set, n_list, 2, 1);
    std::vector<std::pair<int, double>> pairs;
    pairs.reserve(ns.size());
    for (int n : ns)
        pairs.emplace_back(n, n * set.entries.at(n)[0] - 0.5 * PI);
    return extrapolate(pairs, 1);
}

Curve estimate_f(const NodalSet& set, const InversionGrid& grid,
                 const std::vector<int>& n_list) {
    const std::vector<int> ns = checked_levels(set, n_list, 2, 2);

    // Per-level tables of the first-limit samples over that level's nodes.
    std::vector<const std::vector<double>*> node_arrays;
    std::vector<std::vector<double>> t1;
    for (int n : ns) {
        const std::vector<double>& nodes = set.entries.at(n);
        std::vector<double> row(nodes.size());
        for (size_t j = 0; j < nodes.size(); ++j)
            row[j] = n * nodes[j] - (static_cast<double>(j) + 0.5) * PI;
        node_arrays.push_back(&nodes);
        t1.push_back(std::move(row));
    }

    Curve out = make_curve(grid, true);
    std::vector<std::pair<int, double>> pairs(ns.size());
    for (int i = 0; i < grid.points; ++i) {
        const double x = grid.x(i);
        for (size_t k = 0; k < ns.size(); ++k)
            pairs[k] = {ns[k], interp_cubic(*node_arrays[k], t1[k], x)};
        FitDiagnostics diag;
        out.values[static_cast<size_t>(i)] = extrapolate(pairs, 1, &diag);
        out.fit_rms[static_cast<size_t>(i)] = diag.residual_rms;
    }
    return out;
}

std::pair<Curve, Curve> stage1(const Curve& f_hat, double theta_hat) {
    check_curve(f_hat, "stage1");
    Curve mu = make_curve(f_hat.grid, false);
    Curve mu_prime = make_curve(f_hat.grid, false);
    const double slope = (PI + 2.0 * theta_hat) / (2.0 * PI);
    for (int i = 0; i < f_hat.size(); ++i)
        mu.values[static_cast<size_t>(i)] = f_hat[i] - theta_hat + f_hat.grid.x(i) * slope;
    const std::vector<double> fp = gradient(f_hat.values, f_hat.grid.step());
    for (int i = 0; i < f_hat.size(); ++i)
        mu_prime.values[static_cast<size_t>(i)] = fp[static_cast<size_t>(i)] + 0.5 + theta_hat / PI;
    return {std::move(mu), std::move(mu_prime)};
}

Curve estimate_g(const NodalSet& set, const std::vector<int>& n_list,
                 double theta_hat, const Curve& mu_hat) {
    const std::vector<int> ns = checked_levels(set, n_list, 3, 2);
    check_curve(mu_hat, "estimate_g");
    const double d = PI + 2.0 * theta_hat;

    std::vector<const std::vector<double>*> node_arrays;
    std::vector<std::vector<double>> t2;
    for (int n : ns) {
        const std::vector<double>& nodes = set.entries.at(n);
        std::vector<double> row(nodes.size());
        for (size_t j = 0; j < nodes.size(); ++j) {
            const double jj = static_cast<double>(j) + 0.5;
            row[j] = 2.0 * n * PI *
                     (n * nodes[j] - jj * PI - mu_hat.at(nodes[j]) - theta_hat +
                      jj * d / (2.0 * n));
        }
        node_arrays.push_back(&nodes);
        t2.push_back(std::move(row));
    }

    const std::vector<double> ns_d(ns.begin(), ns.end());
    const std::vector<int> powers{1, 0, -1};
    Curve out = make_curve(mu_hat.grid, true);
    std::vector<double> ys(ns.size());
    for (int i = 0; i < out.grid.points; ++i) {
        const double x = out.grid.x(i);
        for (size_t k = 0; k < ns.size(); ++k)
            ys[k] = blend_at(*node_arrays[k], t2[k], x);
        FitDiagnostics diag;
        out.values[static_cast<size_t>(i)] = extrapolate_basis(ns_d, ys, powers, &diag);
        out.fit_rms[static_cast<size_t>(i)] = diag.residual_rms;
    }
    return out;
}

std::pair<Curve, double> estimate_h(const NodalSet& set, const std::vector<int>& n_list,
                                    double theta_hat, const Curve& mu_hat,
                                    const Curve& g_hat, int max_iterations,
                                    double tolerance, StageThreeDiagnostics* diagnostics) {
    const std::vector<int> ns = checked_levels(set, n_list, 4, 2);
    check_curve(mu_hat, "estimate_h");
    check_curve(g_hat, "estimate_h");
    if (!(mu_hat.grid == g_hat.grid))
        throw InverseError("estimate_h: mu_hat and g_hat live on different grids");
    if (max_iterations < 1) throw InverseError("estimate_h: need at least one iteration");

    const InversionGrid& grid = mu_hat.grid;
    const int m = grid.points;
    const double d = PI + 2.0 * theta_hat;
    const double d_sq_over = d * d / (2.0 * PI);

    // Level-constant tables: node positions, mu at the nodes, and the
    // a-independent parts of the third-limit samples.
    std::vector<const std::vector<double>*> node_arrays;
    std::vector<std::vector<double>> mu_at_nodes;
    for (int n : ns) {
        const std::vector<double>& nodes = set.entries.at(n);
        std::vector<double> mu_row(nodes.size());
        for (size_t j = 0; j < nodes.size(); ++j) mu_row[j] = mu_hat.at(nodes[j]);
        node_arrays.push_back(&nodes);
        mu_at_nodes.push_back(std::move(mu_row));
    }

    const std::vector<double> ns_d(ns.begin(), ns.end());
    const std::vector<int> powers{2, 1, 0, -1};
    const int interior_lo = m / 10;
    const int interior_hi = m - m / 10;

    Curve h = make_curve(grid, true);
    Curve b_curve = make_curve(grid, false);
    std::vector<std::vector<double>> t3(ns.size());
    std::vector<double> ys(ns.size());
    std::vector<double> ratio;

    double a_hat = 0.0;
    bool converged = false;
    int iterations = 0;
    double last_delta = 0.0;
    double mean = 0.0;

    while (iterations < max_iterations) {
        ++iterations;

        // Phase integrand implied by the current spectral constant.
        for (int i = 0; i < m; ++i) {
            const double x = grid.x(i);
            b_curve.values[static_cast<size_t>(i)] =
                (g_hat[i] + (mu_hat[i] + theta_hat) * d + x * a_hat - x * d_sq_over) / PI;
        }

        for (size_t k = 0; k < ns.size(); ++k) {
            const int n = ns[k];
            const std::vector<double>& nodes = *node_arrays[k];
            const double lambda = n + d / (2.0 * PI) + a_hat / (2.0 * PI * n);
            const double n_over_lambda = n / lambda;
            const double mu_scale = 1.0 - d / (2.0 * PI * n);
            const double mem_scale = n / (2.0 * lambda * lambda);
            std::vector<double>& row = t3[k];
            row.resize(nodes.size());
            for (size_t j = 0; j < nodes.size(); ++j) {
                const double jj = static_cast<double>(j) + 0.5;
                row[j] = 2.0 * PI * n * n *
                         (n * nodes[j] - jj * PI * n_over_lambda -
                          (mu_at_nodes[k][j] + theta_hat) * mu_scale -
                          mem_scale * b_curve.at(nodes[j]));
            }
        }

        for (int i = 0; i < m; ++i) {
            const double x = grid.x(i);
            for (size_t k = 0; k < ns.size(); ++k)
                ys[k] = blend_at(*node_arrays[k], t3[k], x);
            FitDiagnostics diag;
            h.values[static_cast<size_t>(i)] = extrapolate_basis(ns_d, ys, powers, &diag);
            h.fit_rms[static_cast<size_t>(i)] = diag.residual_rms;
        }

        // Constancy identity of h/(mu + theta) updates the spectral constant.
        ratio.clear();
        for (int i = interior_lo; i < interior_hi; ++i)
            ratio.push_back(h[i] / (mu_hat[i] + theta_hat));
        mean = 0.0;
        for (double r : ratio) mean += r;
        mean /= static_cast<double>(ratio.size());

        const double a_next = d_sq_over - mean;
        last_delta = std::abs(a_next - a_hat);
        a_hat = a_next;
        if (last_delta < tolerance) {
            converged = true;
            break;
        }
    }

    double spread = 0.0;
    for (double r : ratio) spread = std::max(spread, std::abs(r - mean));
    spread = std::abs(mean) > 0.0 ? spread / std::abs(mean)
                                  : std::numeric_limits<double>::infinity();

    if (diagnostics) {
        diagnostics->converged = converged;
        diagnostics->iterations = iterations;
        diagnostics->last_delta = last_delta;
        diagnostics->h_spread = spread;
    }
    return {std::move(h), a_hat};
}

Reconstruction reconstruct(const NodalSet& set,
                           const std::optional<SampledFunction>& l_known,
                           const Options& options) {
    validate(set);
    const std::vector<int> ns = checked_levels(set, options.n_list, 4, 2);

    Reconstruction out;
    out.theta_hat = estimate_theta(set, ns);
    if (!(out.theta_hat > 0.0 && out.theta_hat < PI))
        throw InverseError("estimated boundary angle " + std::to_string(out.theta_hat) +
                           " falls outside (0, pi); nodal data inconsistent");

    Curve f_hat = estimate_f(set, options.grid, ns);
    auto [mu_hat, mu_prime_direct] = stage1(f_hat, out.theta_hat);
    Curve g_hat = estimate_g(set, ns, out.theta_hat, mu_hat);

    StageThreeDiagnostics stage3;
    auto [h_hat, a_hat] = estimate_h(set, ns, out.theta_hat, mu_hat, g_hat,
                                     options.stage3_max_iterations,
                                     options.stage3_tolerance, &stage3);
    out.a_hat = a_hat;
    out.h_spread = stage3.h_spread;
    out.stage3_converged = stage3.converged;
    out.stage3_last_delta = stage3.last_delta;

    const double d = PI + 2.0 * out.theta_hat;
    out.f_pi_residual = quad_extrap(f_hat, PI) + 0.5 * PI;

    const double g_at_pi = quad_extrap(g_hat, PI);
    const double g_at_0 = quad_extrap(g_hat, 0.0);
    const double h_at_0 = quad_extrap(h_hat, 0.0);
    out.omega_pi_hat = (g_at_pi - PI * out.theta_hat - 0.5 * PI * PI) / (2.0 * PI);

    const double sin_two_theta = std::sin(2.0 * out.theta_hat);
    out.v0_degenerate = std::abs(sin_two_theta) <= options.degenerate_sin_bound;
    out.v0_hat = out.v0_degenerate
                     ? 0.0
                     : (g_at_0 + out.theta_hat * d) / (PI * sin_two_theta);

    const InversionGrid& grid = options.grid;
    const int m = grid.points;

    // Derivative of the known antisymmetric-kernel integral, brought onto the
    // inversion grid (differentiate on its own fine grid, then interpolate).
    std::vector<double> l_prime(static_cast<size_t>(m), 0.0);
    if (l_known.has_value()) {
        const SampledFunction dl = central_diff(*l_known);
        for (int i = 0; i < m; ++i)
            l_prime[static_cast<size_t>(i)] = interp_cubic(dl, grid.x(i));
    }

    const std::vector<double> g_prime = gradient(g_hat.values, grid.step());
    Curve v_sq = make_curve(grid, false);
    out.clip_count = 0;
    out.v_sq_cross_check = 0.0;
    for (int i = 0; i < m; ++i) {
        const double common = g_prime[static_cast<size_t>(i)] + mu_prime_direct[i] * d;
        const double primary = (common + a_hat - d * d / (2.0 * PI)) / PI +
                               l_prime[static_cast<size_t>(i)];
        const double through_h = (common - h_at_0 / out.theta_hat) / PI +
                                 l_prime[static_cast<size_t>(i)];
        out.v_sq_cross_check = std::max(out.v_sq_cross_check, std::abs(primary - through_h));
        double value = primary;
        if (value < 0.0) {
            value = 0.0;
            ++out.clip_count;
        }
        v_sq.values[static_cast<size_t>(i)] = value;
    }

    double sign = 1.0;
    out.v_sign_defaulted = true;
    if (!out.v0_degenerate && std::abs(out.v0_hat) > options.v0_sign_tolerance) {
        sign = out.v0_hat < 0.0 ? -1.0 : 1.0;
        out.v_sign_defaulted = false;
    }

    Curve p_hat = make_curve(grid, false);
    Curve r_hat = make_curve(grid, false);
    Curve mu_prime_hat = make_curve(grid, false);
    Curve v_hat = make_curve(grid, false);
    for (int i = 0; i < m; ++i) {
        const double v = sign * std::sqrt(v_sq[i]);
        const double p = mu_prime_direct[i] + v;
        const double r = mu_prime_direct[i] - v;
        p_hat.values[static_cast<size_t>(i)] = p;
        r_hat.values[static_cast<size_t>(i)] = r;
        // Re-centre so that p + r == 2 mu' and p - r == 2 v hold bitwise.
        mu_prime_hat.values[static_cast<size_t>(i)] = 0.5 * (p + r);
        v_hat.values[static_cast<size_t>(i)] = 0.5 * (p - r);
    }

    out.mu_hat = std::move(mu_hat);
    out.mu_prime_hat = std::move(mu_prime_hat);
    out.v_sq_hat = std::move(v_sq);
    out.v_hat = std::move(v_hat);
    out.p_hat = std::move(p_hat);
    out.r_hat = std::move(r_hat);
    out.limits.f_hat = std::move(f_hat);
    out.limits.g_hat = std::move(g_hat);
    out.limits.h_hat = std::move(h_hat);
    return out;
}

}  // namespace nodal::inverse
