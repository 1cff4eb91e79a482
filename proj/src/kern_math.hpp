#pragma once
// Shared argument-reduction and polynomial constants for the backend
// sin/cos/exp kernels, plus the scalar step functions the backends mirror.
//
// Algorithm (sin/cos): Cody–Waite reduction x = n*(pi/2) + r with n chosen by
// round-to-nearest-even, carried out in two fma stages against a split pi/2
// (exact enough for |x| < 1e8), then the classic double-precision minimax
// polynomials on |r| <= pi/4 and quadrant fix-up from n mod 4. Larger or
// non-finite arguments are delegated to libm elementwise.
//
// Every operation below is a single IEEE double operation (fma included), so
// a vector implementation that applies the same operations in the same order
// per lane is bit-identical to this scalar version; the unit tests assert
// exactly that.

#include <cmath>
#include <cstdint>

namespace nodal::kern::detail {

// |x| at or above this goes through libm (reduction quality degrades and the
// int32 quotient would eventually overflow).
inline constexpr double kTrigSmallBound = 1.0e8;

inline constexpr double kInvPiO2 = 6.36619772367581382433e-01;  // 2/pi
inline constexpr double kPiO2Hi = 1.57079632673412561417e+00;   // high 33 bits of pi/2
inline constexpr double kPiO2Lo = 6.07710050650619224932e-11;   // pi/2 - kPiO2Hi

// sin polynomial: sin(r) ~ r + r^3*(S1 + z*(S2 + z*(S3 + z*(S4 + z*(S5 + z*S6))))), z = r^2
inline constexpr double kS1 = -1.66666666666666324348e-01;
inline constexpr double kS2 = 8.33333333332248946124e-03;
inline constexpr double kS3 = -1.98412698298579493134e-04;
inline constexpr double kS4 = 2.75573137070700676789e-06;
inline constexpr double kS5 = -2.50507602534068634195e-08;
inline constexpr double kS6 = 1.58969099521155010221e-10;

// cos polynomial: cos(r) ~ 1 - z/2 + z^2*(C1 + z*(C2 + z*(C3 + z*(C4 + z*(C5 + z*C6)))))
inline constexpr double kC1 = 4.16666666666666019037e-02;
inline constexpr double kC2 = -1.38888888888741095749e-03;
inline constexpr double kC3 = 2.48015872894767294178e-05;
inline constexpr double kC4 = -2.75573143513906633035e-07;
inline constexpr double kC5 = 2.08757232129817482790e-09;
inline constexpr double kC6 = -1.13596475577881948265e-11;

// exp: x = n*ln2 + r, |r| <= ln2/2, exp(r) by a degree-12 Taylor Horner
// (tail below one ulp on that interval), scaled by 2^n through the exponent
// field. |x| beyond the finite range goes through libm.
inline constexpr double kExpSmallBound = 708.0;
inline constexpr double kInvLn2 = 1.44269504088896338700e+00;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;

inline constexpr double kExpC[13] = {
    1.0,
    1.0,
    5.0e-01,
    1.66666666666666666667e-01,
    4.16666666666666666667e-02,
    8.33333333333333333333e-03,
    1.38888888888888888889e-03,
    1.98412698412698412698e-04,
    2.48015873015873015873e-05,
    2.75573192239858906526e-06,
    2.75573192239858906526e-07,
    2.50521083854417187751e-08,
    2.08767569878680989792e-09,
};

// Reduced argument and quadrant for |x| < kTrigSmallBound.
struct TrigReduced {
    double r;
    std::int32_t q;  // n mod 4 (n may be negative; q keeps its low two bits)
};

inline TrigReduced trig_reduce(double x) {
    // Round-to-nearest-even matches the vector path's conversion.
    double fn = static_cast<double>(static_cast<std::int32_t>(std::lrint(x * kInvPiO2)));
    double r = std::fma(fn, -kPiO2Hi, x);
    r = std::fma(fn, -kPiO2Lo, r);
    auto n = static_cast<std::int32_t>(fn);
    return {r, static_cast<std::int32_t>(n & 3)};
}

inline double sin_poly(double r) {
    double z = r * r;
    double p = std::fma(z, kS6, kS5);
    p = std::fma(z, p, kS4);
    p = std::fma(z, p, kS3);
    p = std::fma(z, p, kS2);
    p = std::fma(z, p, kS1);
    return std::fma((z * r), p, r);
}

inline double cos_poly(double r) {
    double z = r * r;
    double p = std::fma(z, kC6, kC5);
    p = std::fma(z, p, kC4);
    p = std::fma(z, p, kC3);
    p = std::fma(z, p, kC2);
    p = std::fma(z, p, kC1);
    double w = std::fma(z, -0.5, 1.0);
    return std::fma((z * z), p, w);
}

// Both values at once; quadrant selects/negates.
inline void sincos_small(double x, double& s_out, double& c_out) {
    TrigReduced red = trig_reduce(x);
    double s = sin_poly(red.r);
    double c = cos_poly(red.r);
    bool swap = (red.q & 1) != 0;
    double sv = swap ? c : s;
    double cv = swap ? s : c;
    if ((red.q & 2) != 0) sv = -sv;
    if (((red.q + 1) & 2) != 0) cv = -cv;
    s_out = sv;
    c_out = cv;
}

inline bool trig_needs_libm(double x) {
    return !(std::fabs(x) < kTrigSmallBound);  // catches NaN too
}

inline double exp_small(double x) {
    double fn = static_cast<double>(static_cast<std::int32_t>(std::lrint(x * kInvLn2)));
    double r = std::fma(fn, -kLn2Hi, x);
    r = std::fma(fn, -kLn2Lo, r);
    double p = kExpC[12];
    for (int i = 11; i >= 0; --i) p = std::fma(r, p, kExpC[i]);
    // Scale by 2^n via the exponent field; |n| <= 1022 here since |x| <= 708.
    auto n = static_cast<std::int64_t>(fn);
    std::uint64_t bits = static_cast<std::uint64_t>(1023 + n) << 52;
    double scale;
    __builtin_memcpy(&scale, &bits, sizeof scale);
    return p * scale;
}

inline bool exp_needs_libm(double x) {
    return !(std::fabs(x) < kExpSmallBound);
}

}  // namespace nodal::kern::detail
