#include "banet/kernels.hpp"

namespace banet {
namespace {

void conv2d_scalar(const float* in, int cin, int ph, int pw,
                   const float* w, int cout, int k, int stride,
                   float* out, int oh, int ow) {
    const size_t in_plane = size_t(ph) * pw;
    const size_t w_per_co = size_t(cin) * k * k;
    for (int co = 0; co < cout; ++co) {
        const float* wco = w + size_t(co) * w_per_co;
        float* oplane = out + size_t(co) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float acc = 0.f;
                const float* wp = wco;
                for (int ci = 0; ci < cin; ++ci) {
                    const float* ip = in + ci * in_plane + size_t(oy * stride) * pw + ox * stride;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx)
                            acc += wp[kx] * ip[kx];
                        wp += k;
                        ip += pw;
                    }
                }
                oplane[size_t(oy) * ow + ox] = acc;
            }
        }
    }
}

void conv2d_wgrad_scalar(const float* in, int cin, int ph, int pw,
                         const float* dout, int cout, int k, int stride,
                         int oh, int ow, float* dw) {
    const size_t in_plane = size_t(ph) * pw;
    const size_t o_plane = size_t(oh) * ow;
    for (int co = 0; co < cout; ++co) {
        const float* dco = dout + co * o_plane;
        for (int ci = 0; ci < cin; ++ci) {
            const float* ip = in + ci * in_plane;
            float* dwp = dw + ((size_t(co) * cin + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    float acc = 0.f;
                    for (int oy = 0; oy < oh; ++oy) {
                        const float* row = ip + size_t(oy * stride + ky) * pw + kx;
                        const float* drow = dco + size_t(oy) * ow;
                        for (int ox = 0; ox < ow; ++ox)
                            acc += drow[ox] * row[ox * stride];
                    }
                    dwp[ky * k + kx] += acc;
                }
            }
        }
    }
}

void relu_scalar(float* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] < 0.f) x[i] = 0.f;
}

void relu_bwd_scalar(const float* y, float* dy, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (y[i] <= 0.f) dy[i] = 0.f;
}

void add_scalar(const float* a, const float* b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy_scalar(float a, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_shift_scalar(const float* x, float a, float b, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void sgd_step_scalar(float* w, float* v, const float* g,
                     float lr, float mom, float wd, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        v[i] = mom * v[i] + (g[i] + wd * w[i]);
        w[i] -= lr * v[i];
    }
}

float dot_scalar(const float* a, const float* b, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

float sum_scalar(const float* x, size_t n) {
    float acc = 0.f;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

} // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable t = {
        "scalar",
        conv2d_scalar,
        conv2d_wgrad_scalar,
        relu_scalar,
        relu_bwd_scalar,
        add_scalar,
        axpy_scalar,
        scale_shift_scalar,
        sgd_step_scalar,
        dot_scalar,
        sum_scalar,
    };
    return t;
}

} // namespace banet
