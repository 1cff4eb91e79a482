#pragma once
// Internal: per-backend kernel tables surfaced to the dispatcher.

#include "nodal/kern.hpp"

namespace nodal::kern {

const Kernels& scalar_kernels();

#if defined(__x86_64__) || defined(_M_X64)
// Defined in kern_avx2.cpp (compiled with -mavx2 -mfma); only call after the
// dispatcher has confirmed hardware support.
const Kernels& avx2_kernels();
#endif

}  // namespace nodal::kern
