#include "banet/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace banet {
namespace {

// Gathers 8 floats at stride 2 starting from p: p[0],p[2],...,p[14].
inline __m256 load_stride2(const float* p) {
    __m256 v0 = _mm256_loadu_ps(p);
    __m256 v1 = _mm256_loadu_ps(p + 8);
    __m256 t = _mm256_shuffle_ps(v0, v1, _MM_SHUFFLE(2, 0, 2, 0));
    const __m256i idx = _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7);
    return _mm256_permutevar8x32_ps(t, idx);
}

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// One row segment of 8 outputs for `nco` output channels (nco <= 4),
// accumulating over all (ci, ky, kx). Stride dispatched at compile time.
template <int NCO, int STRIDE>
inline void conv_block8(const float* in, int cin, size_t in_plane, int pw,
                        const float* w, size_t w_per_co, int k,
                        float* const* orow, int oy, int ox) {
    __m256 acc[NCO];
    for (int j = 0; j < NCO; ++j) acc[j] = _mm256_setzero_ps();
    for (int ci = 0; ci < cin; ++ci) {
        const float* ibase = in + ci * in_plane + size_t(oy * STRIDE) * pw + ox * STRIDE;
        const float* wp = w + size_t(ci) * k * k;
        for (int ky = 0; ky < k; ++ky) {
            const float* ip = ibase + size_t(ky) * pw;
            for (int kx = 0; kx < k; ++kx) {
                __m256 iv = STRIDE == 1 ? _mm256_loadu_ps(ip + kx) : load_stride2(ip + kx);
                for (int j = 0; j < NCO; ++j) {
                    __m256 wv = _mm256_broadcast_ss(wp + j * w_per_co + ky * k + kx);
                    acc[j] = _mm256_fmadd_ps(iv, wv, acc[j]);
                }
            }
        }
    }
    for (int j = 0; j < NCO; ++j) _mm256_storeu_ps(orow[j] + ox, acc[j]);
}

template <int STRIDE>
void conv2d_stride(const float* in, int cin, int ph, int pw,
                   const float* w, int cout, int k,
                   float* out, int oh, int ow) {
    const size_t in_plane = size_t(ph) * pw;
    const size_t w_per_co = size_t(cin) * k * k;
    const size_t o_plane = size_t(oh) * ow;
    int co = 0;
    for (; co + 4 <= cout; co += 4) {
        const float* wco = w + size_t(co) * w_per_co;
        for (int oy = 0; oy < oh; ++oy) {
            float* orow[4];
            for (int j = 0; j < 4; ++j) orow[j] = out + (co + j) * o_plane + size_t(oy) * ow;
            int ox = 0;
            for (; ox + 8 <= ow; ox += 8)
                conv_block8<4, STRIDE>(in, cin, in_plane, pw, wco, w_per_co, k, orow, oy, ox);
            for (; ox < ow; ++ox) {
                for (int j = 0; j < 4; ++j) {
                    float acc = 0.f;
                    const float* wp = wco + j * w_per_co;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float* ip = in + ci * in_plane +
                                          size_t(oy * STRIDE) * pw + ox * STRIDE;
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                acc += wp[(ci * k + ky) * k + kx] * ip[size_t(ky) * pw + kx];
                    }
                    orow[j][ox] = acc;
                }
            }
        }
    }
    for (; co < cout; ++co) {
        const float* wco = w + size_t(co) * w_per_co;
        for (int oy = 0; oy < oh; ++oy) {
            float* orow[1] = {out + co * o_plane + size_t(oy) * ow};
            int ox = 0;
            for (; ox + 8 <= ow; ox += 8)
                conv_block8<1, STRIDE>(in, cin, in_plane, pw, wco, w_per_co, k, orow, oy, ox);
            for (; ox < ow; ++ox) {
                float acc = 0.f;
                for (int ci = 0; ci < cin; ++ci) {
                    const float* ip = in + ci * in_plane +
                                      size_t(oy * STRIDE) * pw + ox * STRIDE;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            acc += wco[(ci * k + ky) * k + kx] * ip[size_t(ky) * pw + kx];
                }
                orow[0][ox] = acc;
            }
        }
    }
}

void conv2d_avx2(const float* in, int cin, int ph, int pw,
                 const float* w, int cout, int k, int stride,
                 float* out, int oh, int ow) {
    if (stride == 1)
        conv2d_stride<1>(in, cin, ph, pw, w, cout, k, out, oh, ow);
    else if (stride == 2)
        conv2d_stride<2>(in, cin, ph, pw, w, cout, k, out, oh, ow);
    else
        scalar_kernels().conv2d(in, cin, ph, pw, w, cout, k, stride, out, oh, ow);
}

void conv2d_wgrad_avx2(const float* in, int cin, int ph, int pw,
                       const float* dout, int cout, int k, int stride,
                       int oh, int ow, float* dw) {
    if (stride != 1 && stride != 2) {
        scalar_kernels().conv2d_wgrad(in, cin, ph, pw, dout, cout, k, stride, oh, ow, dw);
        return;
    }
    const size_t in_plane = size_t(ph) * pw;
    const size_t o_plane = size_t(oh) * ow;
    for (int co = 0; co < cout; ++co) {
        const float* dbase = dout + co * o_plane;
        for (int ci = 0; ci < cin; ++ci) {
            const float* ibase = in + ci * in_plane;
            float* dwp = dw + ((size_t(co) * cin + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    __m256 vacc = _mm256_setzero_ps();
                    float tail = 0.f;
                    for (int oy = 0; oy < oh; ++oy) {
                        const float* row = ibase + size_t(oy * stride + ky) * pw + kx;
                        const float* drow = dbase + size_t(oy) * ow;
                        int ox = 0;
                        for (; ox + 8 <= ow; ox += 8) {
                            __m256 dv = _mm256_loadu_ps(drow + ox);
                            __m256 iv = stride == 1 ? _mm256_loadu_ps(row + ox)
                                                    : load_stride2(row + ox * 2);
                            vacc = _mm256_fmadd_ps(dv, iv, vacc);
                        }
                        for (; ox < ow; ++ox) tail += drow[ox] * row[ox * stride];
                    }
                    dwp[ky * k + kx] += hsum(vacc) + tail;
                }
            }
        }
    }
}

void relu_avx2(float* x, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i)
        if (x[i] < 0.f) x[i] = 0.f;
}

void relu_bwd_avx2(const float* y, float* dy, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dy + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
    }
    for (; i < n; ++i)
        if (y[i] <= 0.f) dy[i] = 0.f;
}

void add_avx2(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy_avx2(float a, const float* x, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i),
                                                _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_shift_avx2(const float* x, float a, float b, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    const __m256 bv = _mm256_set1_ps(b);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), bv));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

void sgd_step_avx2(float* w, float* v, const float* g,
                   float lr, float mom, float wd, size_t n) {
    const __m256 momv = _mm256_set1_ps(mom);
    const __m256 wdv = _mm256_set1_ps(wd);
    const __m256 lrv = _mm256_set1_ps(lr);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 wv = _mm256_loadu_ps(w + i);
        __m256 gv = _mm256_fmadd_ps(wdv, wv, _mm256_loadu_ps(g + i));
        __m256 vv = _mm256_fmadd_ps(momv, _mm256_loadu_ps(v + i), gv);
        _mm256_storeu_ps(v + i, vv);
        _mm256_storeu_ps(w + i, _mm256_fnmadd_ps(lrv, vv, wv));
    }
    for (; i < n; ++i) {
        v[i] = mom * v[i] + (g[i] + wd * w[i]);
        w[i] -= lr * v[i];
    }
}

float dot_avx2(const float* a, const float* b, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

float sum_avx2(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

} // namespace

const KernelTable* avx2_kernels_impl() {
    static const KernelTable t = {
        "avx2",
        conv2d_avx2,
        conv2d_wgrad_avx2,
        relu_avx2,
        relu_bwd_avx2,
        add_avx2,
        axpy_avx2,
        scale_shift_avx2,
        sgd_step_avx2,
        dot_avx2,
        sum_avx2,
    };
    return &t;
}

} // namespace banet

#endif // __AVX2__ && __FMA__
