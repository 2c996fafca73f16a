#pragma once

#include <string>
#include <vector>

#include "banet/kernels.hpp"
#include "banet/rng.hpp"
#include "banet/tensor.hpp"

namespace banet::nn {

struct Parameter {
    std::string name;
    std::vector<float> v;
    std::vector<float> g;

    void resize(size_t n) { v.assign(n, 0.f); g.assign(n, 0.f); }
    size_t size() const { return v.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.f); }
};

// Non-learned state carried by the model (running BN stats).
struct Buffer {
    std::string name;
    std::vector<float> v;
};

using ParamList = std::vector<Parameter*>;
using BufferList = std::vector<Buffer*>;

// Layers cache what their backward needs and own their outputs. backward()
// assigns dx (it never accumulates); callers combine branch gradients.

class Conv2d {
public:
    Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, bool bias);
    void init(Pcg32& rng); // Kaiming-uniform weights, zero bias
    const Tensor& forward(const Tensor& x);
    void backward(const Tensor& dout, Tensor& dx);
    void collect(ParamList& ps);

    int cin, cout, k, stride, pad;
    bool has_bias;
    Parameter w, b;

private:
    std::vector<float> padded_; // cached padded input, slack for SIMD overread
    int ph_ = 0, pw_ = 0, in_h_ = 0, in_w_ = 0, n_ = 0;
    Tensor out_;
};

class BatchNorm2d {
public:
    explicit BatchNorm2d(std::string name, int c);
    const Tensor& forward(const Tensor& x, bool train);
    void backward(const Tensor& dout, Tensor& dx);
    void collect(ParamList& ps, BufferList& bs);

    int c;
    float eps = 1e-5f, momentum = 0.1f;
    Parameter gamma, beta;
    Buffer run_mean, run_var;

private:
    Tensor xhat_, out_;
    std::vector<float> invstd_;
    bool train_ = false;
};

class ReLU {
public:
    const Tensor& forward(const Tensor& x);
    void backward(const Tensor& dout, Tensor& dx);

private:
    Tensor out_;
};

// Corner-aligned bilinear resize on NCHW, with exact adjoint.
class Upsample {
public:
    const Tensor& forward(const Tensor& x, int oh, int ow);
    void backward(const Tensor& dout, Tensor& dx);

private:
    int in_h_ = 0, in_w_ = 0;
    Tensor out_;
};

class Sigmoid {
public:
    explicit Sigmoid(float temp = 1.f) : temp(temp) {}
    const Tensor& forward(const Tensor& x);
    void backward(const Tensor& dout, Tensor& dx);

    float temp;

private:
    Tensor out_;
};

class GlobalAvgPool {
public:
    const Tensor& forward(const Tensor& x); // N,C,1,1
    void backward(const Tensor& dout, Tensor& dx);

private:
    int in_h_ = 0, in_w_ = 0;
    Tensor out_;
};

class Concat2 {
public:
    const Tensor& forward(const Tensor& a, const Tensor& b);
    void backward(const Tensor& dout, Tensor& da, Tensor& db);

private:
    int ca_ = 0, cb_ = 0;
    Tensor out_;
};

// out = feat * (1 + gate), gate is N,C,1,1.
class ChannelGate {
public:
    const Tensor& forward(const Tensor& feat, const Tensor& gate);
    void backward(const Tensor& dout, Tensor& dfeat, Tensor& dgate);

private:
    Tensor feat_, gate_, out_;
};

class ConvBnRelu {
public:
    ConvBnRelu(const std::string& name, int cin, int cout, int k, int stride, int pad,
               bool relu = true);
    void init(Pcg32& rng);
    const Tensor& forward(const Tensor& x, bool train);
    void backward(const Tensor& dout, Tensor& dx);
    void collect(ParamList& ps, BufferList& bs);

    Conv2d conv;
    BatchNorm2d bn;
    bool has_relu;

private:
    ReLU relu_;
};

// Residual bottleneck, identity shortcut (in/out channels equal):
// 1x1 C->mid, 3x3 mid->mid, 1x1 mid->C, add, relu.
class Bottleneck {
public:
    Bottleneck(const std::string& name, int c, int mid);
    void init(Pcg32& rng);
    const Tensor& forward(const Tensor& x, bool train);
    void backward(const Tensor& dout, Tensor& dx);
    void collect(ParamList& ps, BufferList& bs);

private:
    ConvBnRelu c1_, c2_;
    Conv2d c3_;
    BatchNorm2d bn3_;
    Tensor out_;
    const Tensor* in_ = nullptr;
};

// Stride-2 entry conv followed by residual blocks.
class EncoderStage {
public:
    EncoderStage(const std::string& name, int cin, int c, int mid, int blocks);
    void init(Pcg32& rng);
    const Tensor& forward(const Tensor& x, bool train);
    void backward(const Tensor& dout, Tensor& dx);
    void collect(ParamList& ps, BufferList& bs);

private:
    ConvBnRelu entry_;
    std::vector<Bottleneck> blocks_;
};

} // namespace banet::nn
