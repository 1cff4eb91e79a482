// AVX2+FMA backend. Mirrors kern_scalar.cpp operation-for-operation: the
// same Cody-Waite stages, polynomial fma chains, and reduction tree, so
// results are bit-identical to the reference (asserted by the unit tests).
// Out-of-range / non-finite lanes are zero-masked through the fast path and
// patched from libm afterwards, exactly like the scalar per-element branch.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

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

const __m256d kSignBit = _mm256_set1_pd(-0.0);

inline __m256d vabs(__m256d x) { return _mm256_andnot_pd(kSignBit, x); }

// Lanes with |x| < bound (false for NaN, matching the scalar test).
inline __m256d in_range_mask(__m256d x, double bound) {
    return _mm256_cmp_pd(vabs(x), _mm256_set1_pd(bound), _CMP_LT_OQ);
}

struct VTrig {
    __m256d s;
    __m256d c;
};

// Fast-path sincos for four in-range lanes (others must be pre-masked to 0).
inline VTrig sincos4(__m256d x) {
    __m256d prod = _mm256_mul_pd(x, _mm256_set1_pd(detail::kInvPiO2));
    __m128i ni = _mm256_cvtpd_epi32(prod);  // round-to-nearest-even
    __m256d fn = _mm256_cvtepi32_pd(ni);
    __m256d r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(detail::kPiO2Hi), x);
    r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(detail::kPiO2Lo), r);

    __m256d z = _mm256_mul_pd(r, r);
    __m256d ps = _mm256_fmadd_pd(z, _mm256_set1_pd(detail::kS6), _mm256_set1_pd(detail::kS5));
    ps = _mm256_fmadd_pd(z, ps, _mm256_set1_pd(detail::kS4));
    ps = _mm256_fmadd_pd(z, ps, _mm256_set1_pd(detail::kS3));
    ps = _mm256_fmadd_pd(z, ps, _mm256_set1_pd(detail::kS2));
    ps = _mm256_fmadd_pd(z, ps, _mm256_set1_pd(detail::kS1));
    __m256d s = _mm256_fmadd_pd(_mm256_mul_pd(z, r), ps, r);

    __m256d pc = _mm256_fmadd_pd(z, _mm256_set1_pd(detail::kC6), _mm256_set1_pd(detail::kC5));
    pc = _mm256_fmadd_pd(z, pc, _mm256_set1_pd(detail::kC4));
    pc = _mm256_fmadd_pd(z, pc, _mm256_set1_pd(detail::kC3));
    pc = _mm256_fmadd_pd(z, pc, _mm256_set1_pd(detail::kC2));
    pc = _mm256_fmadd_pd(z, pc, _mm256_set1_pd(detail::kC1));
    __m256d w = _mm256_fmadd_pd(z, _mm256_set1_pd(-0.5), _mm256_set1_pd(1.0));
    __m256d c = _mm256_fmadd_pd(_mm256_mul_pd(z, z), pc, w);

    // Quadrant fix-up from n mod 4: odd n swaps sin/cos; bit 1 of n flips the
    // sin sign; bit 1 of n+1 flips the cos sign.
    __m128i one = _mm_set1_epi32(1);
    __m128i two = _mm_set1_epi32(2);
    __m128i swap32 = _mm_cmpeq_epi32(_mm_and_si128(ni, one), one);
    __m128i sflip32 = _mm_cmpeq_epi32(_mm_and_si128(ni, two), two);
    __m128i cflip32 = _mm_cmpeq_epi32(_mm_and_si128(_mm_add_epi32(ni, one), two), two);
    __m256d swap_m = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(swap32));
    __m256d sflip_m = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(sflip32));
    __m256d cflip_m = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(cflip32));

    VTrig out;
    out.s = _mm256_blendv_pd(s, c, swap_m);
    out.c = _mm256_blendv_pd(c, s, swap_m);
    out.s = _mm256_xor_pd(out.s, _mm256_and_pd(sflip_m, kSignBit));
    out.c = _mm256_xor_pd(out.c, _mm256_and_pd(cflip_m, kSignBit));
    return out;
}

enum class TrigOut { sin_only, cos_only, both };

template <TrigOut kOut>
void trig_array_avx2(const double* x, double* s_out, double* c_out, std::size_t n) {
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d ok = in_range_mask(xv, detail::kTrigSmallBound);
        int okbits = _mm256_movemask_pd(ok);
        VTrig t = sincos4(_mm256_and_pd(xv, ok));
        if constexpr (kOut != TrigOut::cos_only) _mm256_storeu_pd(s_out + i, t.s);
        if constexpr (kOut != TrigOut::sin_only) _mm256_storeu_pd(c_out + i, t.c);
        if (okbits != 0xF) {
            for (int lane = 0; lane < 4; ++lane) {
                if (okbits & (1 << lane)) continue;
                if constexpr (kOut != TrigOut::cos_only) s_out[i + lane] = std::sin(x[i + lane]);
                if constexpr (kOut != TrigOut::sin_only) c_out[i + lane] = std::cos(x[i + lane]);
            }
        }
    }
    for (std::size_t i = n4; i < n; ++i) {
        if (trig_needs_libm(x[i])) {
            if constexpr (kOut != TrigOut::cos_only) s_out[i] = std::sin(x[i]);
            if constexpr (kOut != TrigOut::sin_only) c_out[i] = std::cos(x[i]);
        } else {
            double s, c;
            sincos_small(x[i], s, c);
            if constexpr (kOut != TrigOut::cos_only) s_out[i] = s;
            if constexpr (kOut != TrigOut::sin_only) c_out[i] = c;
        }
    }
}

void sin_array_avx2(const double* x, double* out, std::size_t n) {
    trig_array_avx2<TrigOut::sin_only>(x, out, nullptr, n);
}

void cos_array_avx2(const double* x, double* out, std::size_t n) {
    trig_array_avx2<TrigOut::cos_only>(x, nullptr, out, n);
}

void sincos_array_avx2(const double* x, double* s, double* c, std::size_t n) {
    trig_array_avx2<TrigOut::both>(x, s, c, n);
}

inline __m256d exp4(__m256d x) {
    __m256d prod = _mm256_mul_pd(x, _mm256_set1_pd(detail::kInvLn2));
    __m128i ni = _mm256_cvtpd_epi32(prod);
    __m256d fn = _mm256_cvtepi32_pd(ni);
    __m256d r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(detail::kLn2Hi), x);
    r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(detail::kLn2Lo), r);
    __m256d p = _mm256_set1_pd(detail::kExpC[12]);
    for (int k = 11; k >= 0; --k)
        p = _mm256_fmadd_pd(r, p, _mm256_set1_pd(detail::kExpC[k]));
    __m256i n64 = _mm256_cvtepi32_epi64(ni);
    __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

void exp_array_avx2(const double* x, double* out, std::size_t n) {
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d ok = in_range_mask(xv, detail::kExpSmallBound);
        int okbits = _mm256_movemask_pd(ok);
        _mm256_storeu_pd(out + i, exp4(_mm256_and_pd(xv, ok)));
        if (okbits != 0xF) {
            for (int lane = 0; lane < 4; ++lane)
                if (!(okbits & (1 << lane))) out[i + lane] = std::exp(x[i + lane]);
        }
    }
    for (std::size_t i = n4; i < n; ++i)
        out[i] = exp_needs_libm(x[i]) ? std::exp(x[i]) : exp_small(x[i]);
}

// Reduction tree fixed as ((lane0+lane2)+(lane1+lane3))+tail to match the
// scalar reference's four accumulators.
inline double hsum(__m256d acc, double tail) {
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d pair = _mm_add_pd(lo, hi);
    double s02 = _mm_cvtsd_f64(pair);
    double s13 = _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
    return (s02 + s13) + tail;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double tail = 0.0;
    for (std::size_t i = n4; i < n; ++i) tail = std::fma(a[i], b[i], tail);
    return hsum(acc, tail);
}

double dot3_avx2(const double* w, const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), ab, acc);
    }
    double tail = 0.0;
    for (std::size_t i = n4; i < n; ++i) tail = std::fma(w[i], a[i] * b[i], tail);
    return hsum(acc, tail);
}

}  // namespace

const Kernels& avx2_kernels() {
    static const Kernels k = {
        sin_array_avx2, cos_array_avx2, sincos_array_avx2,
        exp_array_avx2, dot_avx2,       dot3_avx2,
    };
    return k;
}

}  // namespace nodal::kern

#endif  // x86_64
