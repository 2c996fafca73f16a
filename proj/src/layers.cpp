#include "banet/layers.hpp"

#include <cmath>
#include <cstring>

#include "banet/errors.hpp"

namespace banet::nn {

namespace {

const KernelTable& K() {
    static const KernelTable& t = active_kernels();
    return t;
}

void ensure(Tensor& t, int n, int c, int h, int w) {
    if (t.n() != n || t.c() != c || t.h() != h || t.w() != w) t = Tensor(n, c, h, w);
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int cin_, int cout_, int k_, int stride_, int pad_, bool bias)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_), has_bias(bias) {
    w.name = name + ".w";
    w.resize(static_cast<size_t>(cout) * cin * k * k);
    b.name = name + ".b";
    if (has_bias) b.resize(cout);
}

void Conv2d::init(Pcg32& rng) {
    float bound = std::sqrt(6.f / (static_cast<float>(cin) * k * k));
    for (float& x : w.v) x = rng.uniform(-bound, bound);
    std::fill(b.v.begin(), b.v.end(), 0.f);
}

void Conv2d::collect(ParamList& ps) {
    ps.push_back(&w);
    if (has_bias) ps.push_back(&b);
}

const Tensor& Conv2d::forward(const Tensor& x) {
    if (x.c() != cin) throw DataError("conv " + w.name + ": channel mismatch");
    n_ = x.n();
    in_h_ = x.h();
    in_w_ = x.w();
    ph_ = in_h_ + 2 * pad;
    pw_ = in_w_ + 2 * pad;
    int oh = (ph_ - k) / stride + 1;
    int ow = (pw_ - k) / stride + 1;
    ensure(out_, n_, cout, oh, ow);
    size_t plane = static_cast<size_t>(ph_) * pw_;
    padded_.assign(static_cast<size_t>(n_) * cin * plane + 8, 0.f); // slack for SIMD row tails
    for (int n = 0; n < n_; ++n)
        for (int c = 0; c < cin; ++c) {
            float* dst = padded_.data() + (static_cast<size_t>(n) * cin + c) * plane;
            for (int y = 0; y < in_h_; ++y)
                std::memcpy(dst + static_cast<size_t>(y + pad) * pw_ + pad,
                            &x.at(n, c, y, 0), sizeof(float) * in_w_);
        }
    for (int n = 0; n < n_; ++n)
        K().conv2d(padded_.data() + static_cast<size_t>(n) * cin * plane, cin, ph_, pw_,
                   w.v.data(), cout, k, stride, &out_.at(n, 0, 0, 0), oh, ow);
    if (has_bias)
        for (int n = 0; n < n_; ++n)
            for (int co = 0; co < cout; ++co) {
                float* o = &out_.at(n, co, 0, 0);
                K().scale_shift(o, 1.f, b.v[co], o, static_cast<size_t>(oh) * ow);
            }
    return out_;
}

void Conv2d::backward(const Tensor& dout, Tensor& dx) {
    int oh = dout.h(), ow = dout.w();
    size_t oplane = static_cast<size_t>(oh) * ow;
    size_t pplane = static_cast<size_t>(ph_) * pw_;
    if (has_bias)
        for (int n = 0; n < n_; ++n)
            for (int co = 0; co < cout; ++co)
                b.g[co] += K().sum(&dout.at(n, co, 0, 0), oplane);
    for (int n = 0; n < n_; ++n)
        K().conv2d_wgrad(padded_.data() + static_cast<size_t>(n) * cin * pplane, cin, ph_, pw_,
                         &dout.at(n, 0, 0, 0), cout, k, stride, oh, ow, w.g.data());

    // input gradient: zero-insert dout by stride, pad by (k-1-pad) plus the
    // flooring remainder on the far side, correlate with flipped+transposed w
    std::vector<float> wt(static_cast<size_t>(cin) * cout * k * k);
    for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    wt[((static_cast<size_t>(ci) * cout + co) * k + (k - 1 - ky)) * k +
                       (k - 1 - kx)] = w.v[((static_cast<size_t>(co) * cin + ci) * k + ky) * k + kx];

    int rem_h = (in_h_ + 2 * pad - k) - (oh - 1) * stride;
    int rem_w = (in_w_ + 2 * pad - k) - (ow - 1) * stride;
    int lead = k - 1 - pad;
    int zh = (oh - 1) * stride + 1, zw = (ow - 1) * stride + 1;
    int gph = zh + lead + (lead + rem_h);
    int gpw = zw + lead + (lead + rem_w);
    size_t gplane = static_cast<size_t>(gph) * gpw;
    std::vector<float> zi(static_cast<size_t>(cout) * gplane + 8);
    ensure(dx, n_, cin, in_h_, in_w_);
    for (int n = 0; n < n_; ++n) {
        std::fill(zi.begin(), zi.end(), 0.f);
        for (int co = 0; co < cout; ++co)
            for (int y = 0; y < oh; ++y) {
                float* dst = zi.data() + co * gplane +
                             static_cast<size_t>(y * stride + lead) * gpw + lead;
                const float* src = &dout.at(n, co, y, 0);
                if (stride == 1)
                    std::memcpy(dst, src, sizeof(float) * ow);
                else
                    for (int x = 0; x < ow; ++x) dst[static_cast<size_t>(x) * stride] = src[x];
            }
        K().conv2d(zi.data(), cout, gph, gpw, wt.data(), cin, k, 1, &dx.at(n, 0, 0, 0), in_h_,
                   in_w_);
    }
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int c_) : c(c_) {
    gamma.name = name + ".gamma";
    gamma.resize(c);
    std::fill(gamma.v.begin(), gamma.v.end(), 1.f);
    beta.name = name + ".beta";
    beta.resize(c);
    run_mean.name = name + ".run_mean";
    run_mean.v.assign(c, 0.f);
    run_var.name = name + ".run_var";
    run_var.v.assign(c, 1.f);
}

void BatchNorm2d::collect(ParamList& ps, BufferList& bs) {
    ps.push_back(&gamma);
    ps.push_back(&beta);
    bs.push_back(&run_mean);
    bs.push_back(&run_var);
}

const Tensor& BatchNorm2d::forward(const Tensor& x, bool train) {
    train_ = train;
    int n = x.n(), h = x.h(), w = x.w();
    size_t plane = static_cast<size_t>(h) * w;
    ensure(out_, n, c, h, w);
    invstd_.assign(c, 0.f);
    if (train) {
        ensure(xhat_, n, c, h, w);
        double m = static_cast<double>(n) * plane;
        for (int ci = 0; ci < c; ++ci) {
            double s = 0;
            for (int ni = 0; ni < n; ++ni) s += K().sum(&x.at(ni, ci, 0, 0), plane);
            float mean = static_cast<float>(s / m);
            double sv = 0;
            for (int ni = 0; ni < n; ++ni) {
                const float* p = &x.at(ni, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    double d = p[i] - mean;
                    sv += d * d;
                }
            }
            float var = static_cast<float>(sv / m);
            float istd = 1.f / std::sqrt(var + eps);
            invstd_[ci] = istd;
            for (int ni = 0; ni < n; ++ni) {
                const float* p = &x.at(ni, ci, 0, 0);
                float* xh = &xhat_.at(ni, ci, 0, 0);
                float* o = &out_.at(ni, ci, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    xh[i] = (p[i] - mean) * istd;
                    o[i] = gamma.v[ci] * xh[i] + beta.v[ci];
                }
            }
            float unbias = m > 1 ? static_cast<float>(m / (m - 1)) : 1.f;
            run_mean.v[ci] = (1.f - momentum) * run_mean.v[ci] + momentum * mean;
            run_var.v[ci] = (1.f - momentum) * run_var.v[ci] + momentum * var * unbias;
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            float istd = 1.f / std::sqrt(run_var.v[ci] + eps);
            invstd_[ci] = istd;
            float a = gamma.v[ci] * istd;
            float sh = beta.v[ci] - a * run_mean.v[ci];
            for (int ni = 0; ni < n; ++ni)
                K().scale_shift(&x.at(ni, ci, 0, 0), a, sh, &out_.at(ni, ci, 0, 0), plane);
        }
    }
    return out_;
}

void BatchNorm2d::backward(const Tensor& dout, Tensor& dx) {
    int n = dout.n(), h = dout.h(), w = dout.w();
    size_t plane = static_cast<size_t>(h) * w;
    ensure(dx, n, c, h, w);
    if (!train_) {
        for (int ci = 0; ci < c; ++ci) {
            float a = gamma.v[ci] * invstd_[ci];
            for (int ni = 0; ni < n; ++ni)
                K().scale_shift(&dout.at(ni, ci, 0, 0), a, 0.f, &dx.at(ni, ci, 0, 0), plane);
        }
        return;
    }
    double m = static_cast<double>(n) * plane;
    for (int ci = 0; ci < c; ++ci) {
        double sdy = 0, sdyx = 0;
        for (int ni = 0; ni < n; ++ni) {
            const float* dy = &dout.at(ni, ci, 0, 0);
            const float* xh = &xhat_.at(ni, ci, 0, 0);
            sdy += K().sum(dy, plane);
            sdyx += K().dot(dy, xh, plane);
        }
        gamma.g[ci] += static_cast<float>(sdyx);
        beta.g[ci] += static_cast<float>(sdy);
        float a = gamma.v[ci] * invstd_[ci];
        float mean_dy = static_cast<float>(sdy / m);
        float mean_dyx = static_cast<float>(sdyx / m);
        for (int ni = 0; ni < n; ++ni) {
            const float* dy = &dout.at(ni, ci, 0, 0);
            const float* xh = &xhat_.at(ni, ci, 0, 0);
            float* d = &dx.at(ni, ci, 0, 0);
            for (size_t i = 0; i < plane; ++i)
                d[i] = a * (dy[i] - mean_dy - xh[i] * mean_dyx);
        }
    }
}

// ------------------------------------------------------------------ ReLU

const Tensor& ReLU::forward(const Tensor& x) {
    out_ = x;
    K().relu(out_.data(), out_.size());
    return out_;
}

void ReLU::backward(const Tensor& dout, Tensor& dx) {
    dx = dout;
    K().relu_bwd(out_.data(), dx.data(), dx.size());
}

// -------------------------------------------------------------- Upsample

const Tensor& Upsample::forward(const Tensor& in, int oh, int ow) {
    in_h_ = in.h();
    in_w_ = in.w();
    ensure(out_, in.n(), in.c(), oh, ow);
    float sy = oh > 1 ? static_cast<float>(in_h_ - 1) / (oh - 1) : 0.f;
    float sx = ow > 1 ? static_cast<float>(in_w_ - 1) / (ow - 1) : 0.f;
    for (int y = 0; y < oh; ++y) {
        float fy = sy * y;
        int y0 = std::min(static_cast<int>(fy), in_h_ - 1);
        int y1 = std::min(y0 + 1, in_h_ - 1);
        float ty = fy - y0;
        for (int x = 0; x < ow; ++x) {
            float fx = sx * x;
            int x0 = std::min(static_cast<int>(fx), in_w_ - 1);
            int x1 = std::min(x0 + 1, in_w_ - 1);
            float tx = fx - x0;
            float w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
            float w10 = ty * (1 - tx), w11 = ty * tx;
            for (int n = 0; n < out_.n(); ++n)
                for (int c = 0; c < out_.c(); ++c)
                    out_.at(n, c, y, x) = w00 * in.at(n, c, y0, x0) +
                                          w01 * in.at(n, c, y0, x1) +
                                          w10 * in.at(n, c, y1, x0) +
                                          w11 * in.at(n, c, y1, x1);
        }
    }
    return out_;
}

void Upsample::backward(const Tensor& dout, Tensor& dx) {
    int oh = dout.h(), ow = dout.w();
    ensure(dx, dout.n(), dout.c(), in_h_, in_w_);
    dx.zero();
    float sy = oh > 1 ? static_cast<float>(in_h_ - 1) / (oh - 1) : 0.f;
    float sx = ow > 1 ? static_cast<float>(in_w_ - 1) / (ow - 1) : 0.f;
    for (int y = 0; y < oh; ++y) {
        float fy = sy * y;
        int y0 = std::min(static_cast<int>(fy), in_h_ - 1);
        int y1 = std::min(y0 + 1, in_h_ - 1);
        float ty = fy - y0;
        for (int x = 0; x < ow; ++x) {
            float fx = sx * x;
            int x0 = std::min(static_cast<int>(fx), in_w_ - 1);
            int x1 = std::min(x0 + 1, in_w_ - 1);
            float tx = fx - x0;
            float w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
            float w10 = ty * (1 - tx), w11 = ty * tx;
            for (int n = 0; n < dout.n(); ++n)
                for (int c = 0; c < dout.c(); ++c) {
                    float g = dout.at(n, c, y, x);
                    dx.at(n, c, y0, x0) += w00 * g;
                    dx.at(n, c, y0, x1) += w01 * g;
                    dx.at(n, c, y1, x0) += w10 * g;
                    dx.at(n, c, y1, x1) += w11 * g;
                }
        }
    }
}

// --------------------------------------------------------------- Sigmoid

const Tensor& Sigmoid::forward(const Tensor& x) {
    ensure(out_, x.n(), x.c(), x.h(), x.w());
    const float* p = x.data();
    float* o = out_.data();
    for (size_t i = 0; i < x.size(); ++i) o[i] = 1.f / (1.f + std::exp(-p[i] / temp));
    return out_;
}

void Sigmoid::backward(const Tensor& dout, Tensor& dx) {
    ensure(dx, dout.n(), dout.c(), dout.h(), dout.w());
    const float* dy = dout.data();
    const float* y = out_.data();
    float* d = dx.data();
    for (size_t i = 0; i < dout.size(); ++i) d[i] = dy[i] * y[i] * (1.f - y[i]) / temp;
}

// --------------------------------------------------------- GlobalAvgPool

const Tensor& GlobalAvgPool::forward(const Tensor& x) {
    in_h_ = x.h();
    in_w_ = x.w();
    ensure(out_, x.n(), x.c(), 1, 1);
    size_t plane = static_cast<size_t>(in_h_) * in_w_;
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            out_.at(n, c, 0, 0) = K().sum(&x.at(n, c, 0, 0), plane) / static_cast<float>(plane);
    return out_;
}

void GlobalAvgPool::backward(const Tensor& dout, Tensor& dx) {
    ensure(dx, dout.n(), dout.c(), in_h_, in_w_);
    size_t plane = static_cast<size_t>(in_h_) * in_w_;
    for (int n = 0; n < dout.n(); ++n)
        for (int c = 0; c < dout.c(); ++c) {
            float g = dout.at(n, c, 0, 0) / static_cast<float>(plane);
            float* d = &dx.at(n, c, 0, 0);
            for (size_t i = 0; i < plane; ++i) d[i] = g;
        }
}

// --------------------------------------------------------------- Concat2

const Tensor& Concat2::forward(const Tensor& a, const Tensor& b) {
    ca_ = a.c();
    cb_ = b.c();
    ensure(out_, a.n(), ca_ + cb_, a.h(), a.w());
    size_t plane = static_cast<size_t>(a.h()) * a.w();
    for (int n = 0; n < a.n(); ++n) {
        std::memcpy(&out_.at(n, 0, 0, 0), &a.at(n, 0, 0, 0), sizeof(float) * ca_ * plane);
        std::memcpy(&out_.at(n, ca_, 0, 0), &b.at(n, 0, 0, 0), sizeof(float) * cb_ * plane);
    }
    return out_;
}

void Concat2::backward(const Tensor& dout, Tensor& da, Tensor& db) {
    size_t plane = static_cast<size_t>(dout.h()) * dout.w();
    ensure(da, dout.n(), ca_, dout.h(), dout.w());
    ensure(db, dout.n(), cb_, dout.h(), dout.w());
    for (int n = 0; n < dout.n(); ++n) {
        std::memcpy(&da.at(n, 0, 0, 0), &dout.at(n, 0, 0, 0), sizeof(float) * ca_ * plane);
        std::memcpy(&db.at(n, 0, 0, 0), &dout.at(n, ca_, 0, 0), sizeof(float) * cb_ * plane);
    }
}

// ----------------------------------------------------------- ChannelGate

const Tensor& ChannelGate::forward(const Tensor& feat, const Tensor& gate) {
    feat_ = feat;
    gate_ = gate;
    ensure(out_, feat.n(), feat.c(), feat.h(), feat.w());
    size_t plane = static_cast<size_t>(feat.h()) * feat.w();
    for (int n = 0; n < feat.n(); ++n)
        for (int c = 0; c < feat.c(); ++c)
            K().scale_shift(&feat.at(n, c, 0, 0), 1.f + gate.at(n, c, 0, 0), 0.f,
                            &out_.at(n, c, 0, 0), plane);
    return out_;
}

void ChannelGate::backward(const Tensor& dout, Tensor& dfeat, Tensor& dgate) {
    ensure(dfeat, feat_.n(), feat_.c(), feat_.h(), feat_.w());
    ensure(dgate, feat_.n(), feat_.c(), 1, 1);
    size_t plane = static_cast<size_t>(feat_.h()) * feat_.w();
    for (int n = 0; n < feat_.n(); ++n)
        for (int c = 0; c < feat_.c(); ++c) {
            K().scale_shift(&dout.at(n, c, 0, 0), 1.f + gate_.at(n, c, 0, 0), 0.f,
                            &dfeat.at(n, c, 0, 0), plane);
            dgate.at(n, c, 0, 0) = K().dot(&dout.at(n, c, 0, 0), &feat_.at(n, c, 0, 0), plane);
        }
}

// ------------------------------------------------------------ ConvBnRelu

ConvBnRelu::ConvBnRelu(const std::string& name, int cin, int cout, int k, int stride, int pad,
                       bool relu)
    : conv(name, cin, cout, k, stride, pad, /*bias=*/false), bn(name, cout), has_relu(relu) {}

void ConvBnRelu::init(Pcg32& rng) { conv.init(rng); }

void ConvBnRelu::collect(ParamList& ps, BufferList& bs) {
    conv.collect(ps);
    bn.collect(ps, bs);
}

const Tensor& ConvBnRelu::forward(const Tensor& x, bool train) {
    const Tensor& y = bn.forward(conv.forward(x), train);
    return has_relu ? relu_.forward(y) : y;
}

void ConvBnRelu::backward(const Tensor& dout, Tensor& dx) {
    Tensor t1, t2;
    const Tensor* d = &dout;
    if (has_relu) {
        relu_.backward(dout, t1);
        d = &t1;
    }
    bn.backward(*d, t2);
    conv.backward(t2, dx);
}

// ------------------------------------------------------------ Bottleneck

Bottleneck::Bottleneck(const std::string& name, int c, int mid)
    : c1_(name + ".c1", c, mid, 1, 1, 0), c2_(name + ".c2", mid, mid, 3, 1, 1),
      c3_(name + ".c3", mid, c, 1, 1, 0, /*bias=*/false), bn3_(name + ".c3", c) {}

void Bottleneck::init(Pcg32& rng) {
    c1_.init(rng);
    c2_.init(rng);
    c3_.init(rng);
}

void Bottleneck::collect(ParamList& ps, BufferList& bs) {
    c1_.collect(ps, bs);
    c2_.collect(ps, bs);
    c3_.collect(ps);
    bn3_.collect(ps, bs);
}

const Tensor& Bottleneck::forward(const Tensor& x, bool train) {
    in_ = &x;
    const Tensor& t = bn3_.forward(c3_.forward(c2_.forward(c1_.forward(x, train), train)), train);
    ensure(out_, x.n(), x.c(), x.h(), x.w());
    K().add(t.data(), x.data(), out_.data(), out_.size());
    K().relu(out_.data(), out_.size());
    return out_;
}

void Bottleneck::backward(const Tensor& dout, Tensor& dx) {
    Tensor dsum = dout;
    K().relu_bwd(out_.data(), dsum.data(), dsum.size());
    Tensor d3, d2, d1;
    bn3_.backward(dsum, d3);
    c3_.backward(d3, d2);
    c2_.backward(d2, d1);
    c1_.backward(d1, dx);
    K().add(dx.data(), dsum.data(), dx.data(), dx.size()); // identity shortcut
}

// ---------------------------------------------------------- EncoderStage

EncoderStage::EncoderStage(const std::string& name, int cin, int c, int mid, int blocks)
    : entry_(name + ".entry", cin, c, 3, 2, 1) {
    blocks_.reserve(blocks);
    for (int i = 0; i < blocks; ++i)
        blocks_.emplace_back(name + ".b" + std::to_string(i), c, mid);
}

void EncoderStage::init(Pcg32& rng) {
    entry_.init(rng);
    for (auto& b : blocks_) b.init(rng);
}

void EncoderStage::collect(ParamList& ps, BufferList& bs) {
    entry_.collect(ps, bs);
    for (auto& b : blocks_) b.collect(ps, bs);
}

const Tensor& EncoderStage::forward(const Tensor& x, bool train) {
    const Tensor* t = &entry_.forward(x, train);
    for (auto& b : blocks_) t = &b.forward(*t, train);
    return *t;
}

void EncoderStage::backward(const Tensor& dout, Tensor& dx) {
    Tensor cur = dout, nxt;
    for (size_t i = blocks_.size(); i-- > 0;) {
        blocks_[i].backward(cur, nxt);
        std::swap(cur, nxt);
    }
    entry_.backward(cur, dx);
}

} // namespace banet::nn
