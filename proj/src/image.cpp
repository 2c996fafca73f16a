#include "banet/image.hpp"

#include <algorithm>
#include <cmath>

#include "banet/errors.hpp"

namespace banet::img {

const char* mask_role_name(MaskRole r) {
    switch (r) {
        case MaskRole::SegTarget: return "seg_target";
        case MaskRole::BoundaryTarget: return "boundary_target";
        case MaskRole::Attention: return "attention";
        case MaskRole::Confidence: return "confidence";
    }
    return "?";
}

template <typename T>
Plane<T> minmax_normalize(const Plane<T>& in) {
    Plane<T> out(in.h, in.w);
    if (in.v.empty()) return out;
    auto [mn_it, mx_it] = std::minmax_element(in.v.begin(), in.v.end());
    T mn = *mn_it, mx = *mx_it;
    T r = mx - mn;
    if (r == T(0)) return out; // constant map -> all zeros
    for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = (in.v[i] - mn) / r;
    return out;
}

template Plane<float> minmax_normalize(const Plane<float>&);
template Plane<double> minmax_normalize(const Plane<double>&);

template <typename T>
Plane<T> resize_bilinear(const Plane<T>& in, int oh, int ow) {
    if (in.h < 1 || in.w < 1 || oh < 1 || ow < 1)
        throw DataError("resize_bilinear: empty plane");
    if (oh == in.h && ow == in.w) return in; // identity must be bitwise
    Plane<T> out(oh, ow);
    T sy = oh > 1 ? T(in.h - 1) / T(oh - 1) : T(0);
    T sx = ow > 1 ? T(in.w - 1) / T(ow - 1) : T(0);
    for (int y = 0; y < oh; ++y) {
        T fy = sy * T(y);
        int y0 = std::min(static_cast<int>(fy), in.h - 1);
        int y1 = std::min(y0 + 1, in.h - 1);
        T ty = fy - T(y0);
        for (int x = 0; x < ow; ++x) {
            T fx = sx * T(x);
            int x0 = std::min(static_cast<int>(fx), in.w - 1);
            int x1 = std::min(x0 + 1, in.w - 1);
            T tx = fx - T(x0);
            T a = in.at(y0, x0), b = in.at(y0, x1);
            T c = in.at(y1, x0), d = in.at(y1, x1);
            T top = a + tx * (b - a);
            T bot = c + tx * (d - c);
            T v = top + ty * (bot - top);
            // two-stage lerp can drift past the corner hull by rounding
            T lo = std::min(std::min(a, b), std::min(c, d));
            T hi = std::max(std::max(a, b), std::max(c, d));
            out.at(y, x) = std::clamp(v, lo, hi);
        }
    }
    return out;
}

template Plane<float> resize_bilinear(const Plane<float>&, int, int);
template Plane<double> resize_bilinear(const Plane<double>&, int, int);

Image resize_bilinear(const Image& in, int oh, int ow) {
    Image out(oh, ow);
    for (int c = 0; c < 3; ++c) {
        Planef p = resize_bilinear(in.channel(c), oh, ow);
        std::copy(p.v.begin(), p.v.end(), out.data.begin() + static_cast<size_t>(c) * oh * ow);
    }
    return out;
}

template <typename T>
Plane<T> resize_nearest(const Plane<T>& in, int oh, int ow) {
    if (in.h < 1 || in.w < 1 || oh < 1 || ow < 1)
        throw DataError("resize_nearest: empty plane");
    if (oh == in.h && ow == in.w) return in;
    Plane<T> out(oh, ow);
    double sy = oh > 1 ? double(in.h - 1) / double(oh - 1) : 0.0;
    double sx = ow > 1 ? double(in.w - 1) / double(ow - 1) : 0.0;
    for (int y = 0; y < oh; ++y) {
        int yi = std::min(static_cast<int>(std::lround(sy * y)), in.h - 1);
        for (int x = 0; x < ow; ++x) {
            int xi = std::min(static_cast<int>(std::lround(sx * x)), in.w - 1);
            out.at(y, x) = in.at(yi, xi);
        }
    }
    return out;
}

template Plane<float> resize_nearest(const Plane<float>&, int, int);
template Plane<double> resize_nearest(const Plane<double>&, int, int);

} // namespace banet::img
