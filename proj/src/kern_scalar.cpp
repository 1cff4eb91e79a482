// Reference backend. The reductions keep four independent accumulators and
// fold them in a fixed tree so the AVX2 lanes can reproduce every rounding;
// see kern_math.hpp for the shared transcendental steps.

#include <cmath>
#include <cstddef>

#include "kern_backends.hpp"
#include "kern_math.hpp"

namespace nodal::kern {

namespace {

using detail::exp_needs_libm;
using detail::exp_small;
using detail::sincos_small;
using detail::trig_needs_libm;

void sin_array_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (trig_needs_libm(x[i])) {
            out[i] = std::sin(x[i]);
        } else {
            double s, c;
            sincos_small(x[i], s, c);
            out[i] = s;
        }
    }
}

void cos_array_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (trig_needs_libm(x[i])) {
            out[i] = std::cos(x[i]);
        } else {
            double s, c;
            sincos_small(x[i], s, c);
            out[i] = c;
        }
    }
}

void sincos_array_scalar(const double* x, double* s, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (trig_needs_libm(x[i])) {
            s[i] = std::sin(x[i]);
            c[i] = std::cos(x[i]);
        } else {
            sincos_small(x[i], s[i], c[i]);
        }
    }
}

void exp_array_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = exp_needs_libm(x[i]) ? std::exp(x[i]) : exp_small(x[i]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 = std::fma(a[i + 0], b[i + 0], acc0);
        acc1 = std::fma(a[i + 1], b[i + 1], acc1);
        acc2 = std::fma(a[i + 2], b[i + 2], acc2);
        acc3 = std::fma(a[i + 3], b[i + 3], acc3);
    }
    double tail = 0.0;
    for (std::size_t i = n4; i < n; ++i) tail = std::fma(a[i], b[i], tail);
    return ((acc0 + acc2) + (acc1 + acc3)) + tail;
}

double dot3_scalar(const double* w, const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 = std::fma(w[i + 0], a[i + 0] * b[i + 0], acc0);
        acc1 = std::fma(w[i + 1], a[i + 1] * b[i + 1], acc1);
        acc2 = std::fma(w[i + 2], a[i + 2] * b[i + 2], acc2);
        acc3 = std::fma(w[i + 3], a[i + 3] * b[i + 3], acc3);
    }
    double tail = 0.0;
    for (std::size_t i = n4; i < n; ++i) tail = std::fma(w[i], a[i] * b[i], tail);
    return ((acc0 + acc2) + (acc1 + acc3)) + tail;
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        sin_array_scalar, cos_array_scalar, sincos_array_scalar,
        exp_array_scalar, dot_scalar,       dot3_scalar,
    };
    return k;
}

}  // namespace nodal::kern
