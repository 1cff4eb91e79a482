#pragma once
// Runtime-dispatched array kernels (sin/cos/exp over arrays, fused weighted
// dot reductions) plus a compiled evaluator for the four entries of the 2x2
// memory kernel M(x,t) along rows of a fixed t-grid.
//
// Backends: "scalar" is the reference; "avx2" mirrors its operation order
// (same fma placement, same 4-lane accumulator structure, same reduction
// tree), so both produce bit-identical results — the equivalence tests pin
// that, not a tolerance. "neon" names the reference loops on aarch64 builds,
// where the baseline compiler already targets NEON; there is no hand-written
// NEON path.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nodal/exprlang.hpp"

namespace nodal::kern {

enum class Backend { scalar, avx2, neon };

// Function table for one backend. Array routines are elementwise; dot and
// dot3 are reductions:
//   dot(a, b)     = sum_i a[i]*b[i]
//   dot3(w, a, b) = sum_i w[i]*a[i]*b[i]
// sincos_array computes both sin and cos of each element in one pass.
// The sin/cos routines take any |x| (arguments beyond the fast-reduction
// range |x| < 1e8, and non-finite values, go through libm elementwise).
struct Kernels {
    void (*sin_array)(const double* x, double* out, std::size_t n);
    void (*cos_array)(const double* x, double* out, std::size_t n);
    void (*sincos_array)(const double* x, double* s, double* c, std::size_t n);
    void (*exp_array)(const double* x, double* out, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*dot3)(const double* w, const double* a, const double* b, std::size_t n);
};

const char* backend_name(Backend b);
bool backend_supported(Backend b);

// Active backend: best supported one, unless overridden by the environment
// variable NODAL_BACKEND (values: scalar, avx2, neon; an unsupported or
// unknown value falls back to scalar with a note on stderr) or by
// force_backend.
Backend active_backend();
// Throws std::invalid_argument when the backend is not supported here.
void force_backend(Backend b);

const Kernels& kernels();           // table of the active backend
const Kernels& kernels(Backend b);  // throws std::invalid_argument if unsupported

// ---------------------------------------------------------------------------
// KernelTape: compiled row evaluation of the memory kernel.
//
// Built once per problem from the four entry expressions over a fixed t-grid,
// it serves the integrator's inner loop,
//   i1 = sum_i w[i] * (m11(x,t_i)*phi1[i] + m12(x,t_i)*phi2[i])
//   i2 = sum_i w[i] * (m21(x,t_i)*phi1[i] + m22(x,t_i)*phi2[i]),
// without re-deriving per-row work it can hoist:
//   * subtrees shared between entries are computed once (structural
//     de-duplication across all four expressions),
//   * t-only subtrees are evaluated over the whole grid at construction,
//   * constant subtrees are folded at construction,
//   * an entry of the form (x-part) * (t-part) is never materialized — the
//     x-part scales the reduction instead,
//   * structurally zero entries are skipped entirely.
//
// Evaluation matches Expr::eval semantics (same operations, same x^y and
// sqrt domain rules); sin/cos/exp of t-dependent subtrees go through the
// backend array kernels. Instances hold scratch buffers: not thread-safe,
// one tape per worker.
// ---------------------------------------------------------------------------
class KernelTape {
public:
    KernelTape(const expr::Expr& m11, const expr::Expr& m12,
               const expr::Expr& m21, const expr::Expr& m22,
               std::vector<double> t_grid);
    ~KernelTape();
    KernelTape(KernelTape&&) noexcept;
    KernelTape& operator=(KernelTape&&) noexcept;
    KernelTape(const KernelTape&) = delete;
    KernelTape& operator=(const KernelTape&) = delete;

    struct Memory {
        double i1 = 0.0;
        double i2 = 0.0;
    };

    // Folds rows at abscissa x against weights and trajectory samples over
    // the first `count` grid points (count <= grid_size()).
    Memory accumulate(double x, std::size_t count, const double* w,
                      const double* phi1, const double* phi2);

    // Writes one entry's row m_entry(x, t_0..t_{count-1}) to out
    // (entry: 0 = m11, 1 = m12, 2 = m21, 3 = m22). Reference/testing path.
    void entry_row(int entry, double x, std::size_t count, double* out);

    bool entry_is_zero(int entry) const;
    bool all_zero() const;
    std::size_t grid_size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nodal::kern
