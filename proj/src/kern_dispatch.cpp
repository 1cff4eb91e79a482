// Backend selection. Default: best supported path for the host. Override
// with NODAL_BACKEND=scalar|avx2|neon (unsupported or unknown values fall
// back to scalar with a note on stderr) or programmatically via
// force_backend, which is strict.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kern_backends.hpp"
#include "nodal/kern.hpp"

namespace nodal::kern {

namespace {

#if defined(__x86_64__) || defined(_M_X64)
constexpr bool kIsX86 = true;
#else
constexpr bool kIsX86 = false;
#endif
#if defined(__aarch64__) || defined(_M_ARM64)
constexpr bool kIsAarch64 = true;
#else
constexpr bool kIsAarch64 = false;
#endif

bool host_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend default_backend() {
    if (backend_supported(Backend::avx2)) return Backend::avx2;
    if (kIsAarch64) return Backend::neon;
    return Backend::scalar;
}

Backend initial_backend() {
    const char* env = std::getenv("NODAL_BACKEND");
    if (env == nullptr || *env == '\0') return default_backend();
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
        if (std::strcmp(env, backend_name(b)) != 0) continue;
        if (backend_supported(b)) return b;
        std::fprintf(stderr, "nodal: NODAL_BACKEND=%s not supported on this host; using scalar\n", env);
        return Backend::scalar;
    }
    std::fprintf(stderr, "nodal: unknown NODAL_BACKEND=%s; using scalar\n", env);
    return Backend::scalar;
}

Backend& current() {
    static Backend b = initial_backend();
    return b;
}

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return kIsX86 && host_has_avx2();
        // aarch64 baselines include NEON; the table is the reference loops,
        // compiled for that ISA (no hand-written NEON path).
        case Backend::neon: return kIsAarch64;
    }
    return false;
}

Backend active_backend() { return current(); }

void force_backend(Backend b) {
    if (!backend_supported(b))
        throw std::invalid_argument(std::string("backend '") + backend_name(b) +
                                    "' is not supported on this host");
    current() = b;
}

const Kernels& kernels(Backend b) {
    if (!backend_supported(b))
        throw std::invalid_argument(std::string("backend '") + backend_name(b) +
                                    "' is not supported on this host");
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) return avx2_kernels();
#endif
    return scalar_kernels();
}

const Kernels& kernels() { return kernels(current()); }

}  // namespace nodal::kern
