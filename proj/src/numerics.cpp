#include "nodal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace nodal {

namespace {

void require_finite(const SampledFunction& f, const char* who) {
    for (double v : f.values)
        if (!std::isfinite(v)) throw NumericsError(std::string(who) + ": non-finite sample");
}

// Shared running-trapezoid recurrence; both trapezoid() and cumulative() are
// thin wrappers so their results agree bitwise.
std::vector<double> trapezoid_running(const SampledFunction& f) {
    const double h = f.grid.step;
    std::vector<double> out(static_cast<size_t>(f.size()), 0.0);
    double acc = 0.0;
    for (int i = 1; i < f.size(); ++i) {
        acc += h * 0.5 * (f[i - 1] + f[i]);
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

double binom(int m, int i) {
    double c = 1.0;
    for (int k = 0; k < i; ++k) c = c * (m - k) / (k + 1);
    return c;
}

// Gregory difference-correction coefficients c_m for m = 1..4.
constexpr double kGregoryC[5] = {0.0, 1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0};

// Forward difference D^m f at index 0 (uses f[0..m]).
double fwd_diff(const SampledFunction& f, int m) {
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        double sign = ((m - i) % 2 == 0) ? 1.0 : -1.0;
        s += sign * binom(m, i) * f[i];
    }
    return s;
}

// Backward difference at index k (uses f[k-m..k]).
double bwd_diff(const SampledFunction& f, int k, int m) {
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        double sign = (i % 2 == 0) ? 1.0 : -1.0;
        s += sign * binom(m, i) * f[k - i];
    }
    return s;
}

// Correction added to the running trapezoid value at index k, using difference
// corrections through the ladder order for k+1 points.
double gregory_correction(const SampledFunction& f, int k, const double* fwd0) {
    const int m_max = gregory_order_for(k + 1);
    if (m_max == 0) return 0.0;
    const double h = f.grid.step;
    double corr = 0.0;
    for (int m = 1; m <= m_max; ++m) {
        double parity = (m % 2 == 0) ? 1.0 : -1.0;
        corr -= h * kGregoryC[m] * (bwd_diff(f, k, m) + parity * fwd0[m]);
    }
    return corr;
}

// Small dense linear solve (Gaussian elimination, partial pivoting); n <= 8.
void solve_inplace(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[static_cast<size_t>(r) * n + col]) >
                std::fabs(a[static_cast<size_t>(piv) * n + col]))
                piv = r;
        if (a[static_cast<size_t>(piv) * n + col] == 0.0)
            throw IllConditionedFit("singular fit matrix");
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<size_t>(piv) * n + c], a[static_cast<size_t>(col) * n + c]);
            std::swap(b[static_cast<size_t>(piv)], b[static_cast<size_t>(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = a[static_cast<size_t>(r) * n + col] / a[static_cast<size_t>(col) * n + col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
            b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= a[static_cast<size_t>(r) * n + c] * b[static_cast<size_t>(c)];
        b[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r) * n + r];
    }
}

// 1-norm condition estimate of a small symmetric positive matrix.
double cond_estimate(std::vector<double> g, int n) {
    double norm = 0.0;
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += std::fabs(g[static_cast<size_t>(r) * n + c]);
        norm = std::max(norm, s);
    }
    double inv_norm = 0.0;
    for (int c = 0; c < n; ++c) {
        std::vector<double> a = g;
        std::vector<double> e(static_cast<size_t>(n), 0.0);
        e[static_cast<size_t>(c)] = 1.0;
        solve_inplace(a, e, n);
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += std::fabs(e[static_cast<size_t>(r)]);
        inv_norm = std::max(inv_norm, s);
    }
    return norm * inv_norm;
}

// Core least squares with column scaling: X is m x k column-major builder
// via callable col(j, i). Returns all coefficients.
std::vector<double> least_squares(int m, int k, const std::function<double(int, int)>& col,
                                  const std::vector<double>& y, FitDiagnostics* diag,
                                  double cond_bound) {
    std::vector<double> scale(static_cast<size_t>(k), 0.0);
    for (int j = 0; j < k; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += col(j, i) * col(j, i);
        scale[static_cast<size_t>(j)] = s > 0.0 ? std::sqrt(s) : 1.0;
    }
    std::vector<double> gram(static_cast<size_t>(k) * k, 0.0);
    std::vector<double> rhs(static_cast<size_t>(k), 0.0);
    for (int a = 0; a < k; ++a) {
        for (int b = a; b < k; ++b) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += col(a, i) * col(b, i);
            s /= scale[static_cast<size_t>(a)] * scale[static_cast<size_t>(b)];
            gram[static_cast<size_t>(a) * k + b] = s;
            gram[static_cast<size_t>(b) * k + a] = s;
        }
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += col(a, i) * y[static_cast<size_t>(i)];
        rhs[static_cast<size_t>(a)] = s / scale[static_cast<size_t>(a)];
    }
    double cond = cond_estimate(gram, k);
    if (cond > cond_bound)
        throw IllConditionedFit("extrapolation design matrix condition " + std::to_string(cond) +
                                " exceeds bound");
    std::vector<double> beta = rhs;
    solve_inplace(gram, beta, k);
    for (int j = 0; j < k; ++j) beta[static_cast<size_t>(j)] /= scale[static_cast<size_t>(j)];
    if (diag) {
        diag->cond = cond;
        double rss = 0.0;
        for (int i = 0; i < m; ++i) {
            double fit = 0.0;
            for (int j = 0; j < k; ++j) fit += beta[static_cast<size_t>(j)] * col(j, i);
            double e = y[static_cast<size_t>(i)] - fit;
            rss += e * e;
        }
        diag->residual_rms = std::sqrt(rss / m);
    }
    return beta;
}

}  // namespace

double trapezoid(const SampledFunction& f) {
    require_finite(f, "trapezoid");
    if (f.grid.n_intervals < 1) throw NumericsError("trapezoid: N >= 1 required");
    return trapezoid_running(f).back();
}

SampledFunction cumulative(const SampledFunction& f) {
    require_finite(f, "cumulative");
    return SampledFunction(f.grid, trapezoid_running(f));
}

int gregory_order_for(int points) {
    if (points >= 10) return 4;
    if (points >= 8) return 3;
    if (points >= 6) return 2;
    if (points >= 4) return 1;
    return 0;
}

std::vector<double> gregory_end_weights(int m) {
    if (m < 0 || m > 4) throw NumericsError("gregory_end_weights: order must be in 0..4");
    std::vector<double> w(static_cast<size_t>(m) + 1, 1.0);
    w[0] = 0.5;
    for (int i = 0; i <= m; ++i) {
        double corr = 0.0;
        for (int mm = std::max(i, 1); mm <= m; ++mm) corr += kGregoryC[mm] * binom(mm, i);
        double sign = (i % 2 == 0) ? 1.0 : -1.0;
        w[static_cast<size_t>(i)] -= sign * corr;
    }
    return w;
}

SampledFunction gregory_cumulative(const SampledFunction& f) {
    require_finite(f, "gregory_cumulative");
    std::vector<double> out = trapezoid_running(f);
    double fwd0[5] = {0, 0, 0, 0, 0};
    const int top = std::min(4, f.grid.n_intervals);
    for (int m = 1; m <= top; ++m) fwd0[m] = fwd_diff(f, m);
    for (int k = 1; k < f.size(); ++k)
        out[static_cast<size_t>(k)] += gregory_correction(f, k, fwd0);
    return SampledFunction(f.grid, std::move(out));
}

double gregory_total(const SampledFunction& f) { return gregory_cumulative(f).values.back(); }

SampledFunction central_diff(const SampledFunction& f) {
    if (f.grid.n_intervals < 2) throw NumericsError("central_diff: N >= 2 required");
    const double h = f.grid.step;
    const int n = f.grid.n_intervals;
    std::vector<double> d(static_cast<size_t>(f.size()));
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for (int i = 1; i < n; ++i) d[static_cast<size_t>(i)] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d[static_cast<size_t>(n)] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    return SampledFunction(f.grid, std::move(d));
}

double bisect(const std::function<double(double)>& fn, double a, double b, double tol) {
    if (!(a < b) || !(tol > 0.0)) throw NumericsError("bisect: need a < b and tol > 0");
    double fa = fn(a);
    double fb = fn(b);
    if (fa * fb >= 0.0) throw NoSignChange("bisect: no sign change on [a, b]");
    const int iters = static_cast<int>(std::ceil(std::log2((b - a) / tol)));
    for (int it = 0; it < iters; ++it) {
        double m = 0.5 * (a + b);
        double fm = fn(m);
        if (fm == 0.0) return m;
        if (fa * fm < 0.0) {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    (void)fb;
    return 0.5 * (a + b);
}

double extrapolate(const std::vector<std::pair<int, double>>& pairs, int model_order,
                   FitDiagnostics* diag, double cond_bound) {
    const int m = static_cast<int>(pairs.size());
    const int k = model_order + 1;
    if (m < k) throw NumericsError("extrapolate: need at least model_order+1 points");
    std::vector<double> y(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) y[static_cast<size_t>(i)] = pairs[static_cast<size_t>(i)].second;
    auto col = [&](int j, int i) {
        return std::pow(1.0 / pairs[static_cast<size_t>(i)].first, j);
    };
    return least_squares(m, k, col, y, diag, cond_bound)[0];
}

double extrapolate_basis(const std::vector<double>& ns, const std::vector<double>& ys,
                         const std::vector<int>& powers, FitDiagnostics* diag,
                         double cond_bound) {
    const int m = static_cast<int>(ns.size());
    const int k = static_cast<int>(powers.size());
    if (static_cast<int>(ys.size()) != m) throw NumericsError("extrapolate_basis: size mismatch");
    if (m < k) throw NumericsError("extrapolate_basis: need at least as many points as basis terms");
    int zero_idx = -1;
    for (int j = 0; j < k; ++j)
        if (powers[static_cast<size_t>(j)] == 0) zero_idx = j;
    if (zero_idx < 0) throw NumericsError("extrapolate_basis: basis must contain power 0");
    auto col = [&](int j, int i) {
        return std::pow(ns[static_cast<size_t>(i)], powers[static_cast<size_t>(j)]);
    };
    auto beta = least_squares(m, k, col, ys, diag, cond_bound);
    return beta[static_cast<size_t>(zero_idx)];
}

std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys, int deg) {
    const int m = static_cast<int>(xs.size());
    const int k = deg + 1;
    if (static_cast<int>(ys.size()) != m || m < k) throw NumericsError("polyfit: bad sizes");
    auto col = [&](int j, int i) { return std::pow(xs[static_cast<size_t>(i)], j); };
    return least_squares(m, k, col, ys, nullptr, 1e14);
}

double polyval(const std::vector<double>& coeffs, double x) {
    double v = 0.0;
    for (size_t j = coeffs.size(); j-- > 0;) v = v * x + coeffs[j];
    return v;
}

double interp_cubic(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const int n = static_cast<int>(xs.size());
    if (n < 2 || static_cast<int>(ys.size()) != n) throw NumericsError("interp_cubic: bad sizes");
    int k = static_cast<int>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    k = std::clamp(k, 1, n - 1);
    int lo = std::clamp(k - 2, 0, std::max(0, n - 4));
    int hi = std::min(lo + 4, n);
    double out = 0.0;
    for (int i = lo; i < hi; ++i) {
        double basis = 1.0;
        for (int j = lo; j < hi; ++j) {
            if (j == i) continue;
            basis *= (x - xs[static_cast<size_t>(j)]) /
                     (xs[static_cast<size_t>(i)] - xs[static_cast<size_t>(j)]);
        }
        out += basis * ys[static_cast<size_t>(i)];
    }
    return out;
}

double interp_cubic(const SampledFunction& f, double x) {
    const int n = f.size();
    if (n < 2) throw NumericsError("interp_cubic: bad sizes");
    const Grid& g = f.grid;
    // First index k with g.x(k) >= x, matching lower_bound on the sampled
    // abscissae; the ceil guess is off by at most one ulp-induced step.
    const double guess = std::ceil(x / g.step);
    int k = (guess != guess) ? 0
                             : static_cast<int>(std::clamp(guess, 0.0, static_cast<double>(n)));
    while (k > 0 && g.x(k - 1) >= x) --k;
    while (k < n && g.x(k) < x) ++k;
    k = std::clamp(k, 1, n - 1);
    const int lo = std::clamp(k - 2, 0, std::max(0, n - 4));
    const int hi = std::min(lo + 4, n);
    double out = 0.0;
    for (int i = lo; i < hi; ++i) {
        double basis = 1.0;
        for (int j = lo; j < hi; ++j) {
            if (j == i) continue;
            basis *= (x - g.x(j)) / (g.x(i) - g.x(j));
        }
        out += basis * f.values[static_cast<size_t>(i)];
    }
    return out;
}

}  // namespace nodal
