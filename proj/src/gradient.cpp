#include "banet/gradient.hpp"

#include <algorithm>
#include <cmath>

#include "banet/errors.hpp"

namespace banet::gcl {

namespace {

constexpr int kKx[3][3] = {{+1, 0, -1}, {+2, 0, -2}, {+1, 0, -1}};
constexpr int kKy[3][3] = {{+1, +2, +1}, {0, 0, 0}, {-1, -2, -1}};

inline int clampi(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

} // namespace

template <typename T>
void sobel(const Plane<T>& in, Plane<T>& gx, Plane<T>& gy) {
    if (in.h < 1 || in.w < 1) throw DataError("sobel: empty plane");
    gx = Plane<T>(in.h, in.w);
    gy = Plane<T>(in.h, in.w);
    // Column and row groups subtract as whole sums so a constant input
    // cancels exactly instead of leaving accumulation-order round-off.
    auto at = [&](int y, int x) { return in.at(clampi(y, in.h - 1), clampi(x, in.w - 1)); };
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            T left = at(y - 1, x - 1) + T(2) * at(y, x - 1) + at(y + 1, x - 1);
            T right = at(y - 1, x + 1) + T(2) * at(y, x + 1) + at(y + 1, x + 1);
            T top = at(y - 1, x - 1) + T(2) * at(y - 1, x) + at(y - 1, x + 1);
            T bot = at(y + 1, x - 1) + T(2) * at(y + 1, x) + at(y + 1, x + 1);
            gx.at(y, x) = left - right;
            gy.at(y, x) = top - bot;
        }
}

template <typename T>
GradientField<T> gradient_field(const Plane<T>& in) {
    GradientField<T> f;
    sobel(in, f.gx, f.gy);
    f.mag = Plane<T>(in.h, in.w);
    f.nux = Plane<T>(in.h, in.w);
    f.nuy = Plane<T>(in.h, in.w);
    const T eps = T(kEps);
    for (size_t i = 0; i < in.v.size(); ++i) {
        T gx = f.gx.v[i], gy = f.gy.v[i];
        T m = std::sqrt(gx * gx + gy * gy);
        f.mag.v[i] = m;
        if (m <= eps) {
            f.nux.v[i] = T(0);
            f.nuy.v[i] = T(0);
        } else {
            f.nux.v[i] = gx / (m + eps);
            f.nuy.v[i] = gy / (m + eps);
        }
    }
    return f;
}

template <typename T>
Plane<T> sobel_backward(int h, int w, const Plane<T>& dgx, const Plane<T>& dgy) {
    Plane<T> din(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T ax = dgx.at(y, x), ay = dgy.at(y, x);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    din.at(clampi(y + dy, h - 1), clampi(x + dx, w - 1)) +=
                        T(kKx[dy + 1][dx + 1]) * ax + T(kKy[dy + 1][dx + 1]) * ay;
        }
    return din;
}

template <typename T>
Plane<T> gradient_field_backward(const GradientField<T>& f, const Plane<T>& dmag,
                                 const Plane<T>& dnux, const Plane<T>& dnuy) {
    const T eps = T(kEps);
    Plane<T> dgx(f.mag.h, f.mag.w), dgy(f.mag.h, f.mag.w);
    for (size_t i = 0; i < f.mag.v.size(); ++i) {
        T m = f.mag.v[i];
        if (m <= eps) continue; // flat region: mag has a kink at 0, direction is clamped
        T gx = f.gx.v[i], gy = f.gy.v[i];
        T inv = T(1) / (m + eps);
        T common = (dnux.v[i] * gx + dnuy.v[i] * gy) * inv * inv / m;
        dgx.v[i] = dmag.v[i] * (gx / m) + dnux.v[i] * inv - gx * common;
        dgy.v[i] = dmag.v[i] * (gy / m) + dnuy.v[i] * inv - gy * common;
    }
    return sobel_backward(f.mag.h, f.mag.w, dgx, dgy);
}

template <typename T>
Plane<T> minmax_backward(const Plane<T>& in, const Plane<T>& dout) {
    Plane<T> din(in.h, in.w);
    auto [mn_it, mx_it] = std::minmax_element(in.v.begin(), in.v.end());
    T mn = *mn_it, mx = *mx_it;
    T r = mx - mn;
    if (r == T(0)) return din;
    size_t imin = static_cast<size_t>(mn_it - in.v.begin());
    size_t imax = static_cast<size_t>(mx_it - in.v.begin());
    T smin = T(0), smax = T(0);
    for (size_t i = 0; i < in.v.size(); ++i) {
        T out = (in.v[i] - mn) / r;
        smin += dout.v[i] * (out - T(1)) / r; // d/dmin of (x - mn)/r
        smax += dout.v[i] * (-out) / r;       // d/dmax
        din.v[i] = dout.v[i] / r;
    }
    din.v[imin] += smin;
    din.v[imax] += smax;
    return din;
}

template <typename T>
PredGradient<T> prediction_gradient(const Plane<T>& pred) {
    PredGradient<T> pg;
    pg.norm = img::minmax_normalize(pred);
    pg.field = gradient_field(pg.norm);
    return pg;
}

template <typename T>
Plane<T> prediction_gradient_backward(const Plane<T>& pred, const PredGradient<T>& pg,
                                      const Plane<T>& dmag, const Plane<T>& dnux,
                                      const Plane<T>& dnuy) {
    Plane<T> dnorm = gradient_field_backward(pg.field, dmag, dnux, dnuy);
    return minmax_backward(pred, dnorm);
}

template <typename T>
GradientField<T> image_gradient(const img::Image& im) {
    Plane<T> gray(im.h, im.w);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            gray.at(y, x) =
                (T(im.at(0, y, x)) + T(im.at(1, y, x)) + T(im.at(2, y, x))) / T(3);
    return gradient_field(img::minmax_normalize(gray));
}

#define BANET_GCL_INST(T)                                                                     \
    template void sobel(const Plane<T>&, Plane<T>&, Plane<T>&);                               \
    template GradientField<T> gradient_field(const Plane<T>&);                               \
    template Plane<T> sobel_backward(int, int, const Plane<T>&, const Plane<T>&);            \
    template Plane<T> gradient_field_backward(const GradientField<T>&, const Plane<T>&,      \
                                              const Plane<T>&, const Plane<T>&);             \
    template Plane<T> minmax_backward(const Plane<T>&, const Plane<T>&);                     \
    template PredGradient<T> prediction_gradient(const Plane<T>&);                           \
    template Plane<T> prediction_gradient_backward(const Plane<T>&, const PredGradient<T>&,  \
                                                   const Plane<T>&, const Plane<T>&,         \
                                                   const Plane<T>&);                         \
    template GradientField<T> image_gradient(const img::Image&);

BANET_GCL_INST(float)
BANET_GCL_INST(double)
#undef BANET_GCL_INST

} // namespace banet::gcl
