#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace banet {

// 2-D scalar raster, row-major. Templated so the loss/gradient math can run
// in double for finite-difference checks while training stays in float.
template <typename T>
struct Plane {
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(int h_, int w_, T fill = T(0)) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

    T& at(int y, int x) { return v[size_t(y) * w + x]; }
    const T& at(int y, int x) const { return v[size_t(y) * w + x]; }
    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    bool same_shape(const Plane& o) const { return h == o.h && w == o.w; }

    template <typename U>
    Plane<U> cast() const {
        Plane<U> out(h, w);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using Planef = Plane<float>;
using Planed = Plane<double>;

// Dense NCHW float tensor used by the network layers.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w)
        : n_(n), c_(c), h_(h), w_(w), data_(size_t(n) * c * h * w, 0.f) {}

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    size_t size() const { return data_.size(); }
    size_t plane_size() const { return size_t(h_) * w_; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float* plane(int n, int c) { return data_.data() + (size_t(n) * c_ + c) * plane_size(); }
    const float* plane(int n, int c) const {
        return data_.data() + (size_t(n) * c_ + c) * plane_size();
    }

    float& at(int n, int c, int y, int x) { return plane(n, c)[size_t(y) * w_ + x]; }
    const float& at(int n, int c, int y, int x) const { return plane(n, c)[size_t(y) * w_ + x]; }

    void zero() { std::fill(data_.begin(), data_.end(), 0.f); }
    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    // Copies one H×W channel slice out as a Plane (used at the loss boundary).
    Planef channel_plane(int n, int c) const {
        Planef p(h_, w_);
        const float* src = plane(n, c);
        std::copy(src, src + plane_size(), p.v.begin());
        return p;
    }
    void set_channel_plane(int n, int c, const Planef& p) {
        assert(p.h == h_ && p.w == w_);
        std::copy(p.v.begin(), p.v.end(), plane(n, c));
    }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

} // namespace banet
