#pragma once

#include <cstddef>

namespace banet {

// Hot arithmetic inner loops, grouped behind a function-pointer table so a
// SIMD variant can be selected once at startup. Conv inputs arrive
// pre-padded; geometry is the caller's problem, the kernels only run loops.
//
// Accumulation order inside one output element is fixed (ci, ky, kx) for
// every variant. Reductions (wgrad, dot, sum) may use lane-parallel partial
// sums, so scalar and SIMD results of those agree only to rounding, not
// bit-exactly; equivalence tests pin the tolerance.
struct KernelTable {
    const char* name;

    // out[co,oy,ox] = sum_{ci,ky,kx} w[co,ci,ky,kx] * in[ci, oy*s+ky, ox*s+kx]
    void (*conv2d)(const float* in, int cin, int ph, int pw,
                   const float* w, int cout, int k, int stride,
                   float* out, int oh, int ow);

    // dw[co,ci,ky,kx] += sum_{oy,ox} dout[co,oy,ox] * in[ci, oy*s+ky, ox*s+kx]
    void (*conv2d_wgrad)(const float* in, int cin, int ph, int pw,
                         const float* dout, int cout, int k, int stride,
                         int oh, int ow, float* dw);

    void (*relu)(float* x, size_t n);
    void (*relu_bwd)(const float* y, float* dy, size_t n); // dy := dy * (y > 0)
    void (*add)(const float* a, const float* b, float* out, size_t n);
    void (*axpy)(float a, const float* x, float* y, size_t n);          // y += a*x
    void (*scale_shift)(const float* x, float a, float b, float* y, size_t n); // y = a*x+b
    // v := mom*v + (g + wd*w); w := w - lr*v
    void (*sgd_step)(float* w, float* v, const float* g,
                     float lr, float mom, float wd, size_t n);
    float (*dot)(const float* a, const float* b, size_t n);
    float (*sum)(const float* x, size_t n);
};

const KernelTable& scalar_kernels();
const KernelTable* avx2_kernels();   // nullptr when unsupported at build or run time

// Runtime selection: AVX2 when the CPU has it, else scalar. The environment
// variable BANET_KERNELS=scalar|avx2 forces a table (used by equivalence
// tests and as the documented deterministic-mode toggle).
const KernelTable& active_kernels();

} // namespace banet
