#pragma once

#include <memory>
#include <string>
#include <vector>

#include "banet/layers.hpp"

namespace banet::nn {

struct StageSpec {
    int channels = 0;
    int blocks = 0;
    int mid = 0;
};

struct ModelConfig {
    int width = 64; // channel cap of the semantic branch
    int stem_channels = 16;
    std::vector<StageSpec> stages; // strides 4, 8, 16, 32
    int mining_channels = 16;
    int fusion_channels = 32;
    int reduce_channels = 16;
    bool use_attention = true; // false: mining branch sees RGB only, no attention head
    float temperature = 4.0f;

    // Preset family: stem = max(16, width/16), channels double per stage and
    // cap at width, blocks {2,2,3,3}, mid = C/2 until the cap is reached.
    static ModelConfig banet(int width);
};

struct ForwardOutput {
    const Tensor* confidence = nullptr;       // N,1,H,W in [0,1]
    const Tensor* attention = nullptr;        // N,1,H,W in [0,1]; null without attention head
    const Tensor* attention_logits = nullptr; // pre-sigmoid attention
};

class BanetModel {
public:
    BanetModel(const ModelConfig& cfg, uint64_t seed);

    ForwardOutput forward(const Tensor& img, bool train);
    // Gradients arrive on the post-sigmoid output maps. d_att may be empty
    // (treated as zero); it must be empty when the head is absent.
    void backward(const Tensor& d_conf, const Tensor& d_att);

    void zero_grad();
    ParamList& params() { return params_; }
    BufferList& buffers() { return buffers_; }
    size_t param_count() const;
    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    // semantic branch
    ConvBnRelu stem_;
    std::vector<EncoderStage> stages_;
    std::vector<std::unique_ptr<ConvBnRelu>> skip_proj_; // 1x1, null when widths match
    std::vector<Upsample> dec_up_;
    ConvBnRelu refine_;
    // attention head
    Conv2d att_head_;
    Upsample att_up_;
    Sigmoid att_sig_;
    // boundary mining branch
    Concat2 mine_cat_;
    ConvBnRelu mine1_, mine2_;
    // fusion
    ConvBnRelu reduce_;
    Upsample red_up_;
    Concat2 fuse_cat_;
    ConvBnRelu fuse_;
    GlobalAvgPool gap_;
    Conv2d gate1_, gate2_;
    ReLU gate_relu_;
    Sigmoid gate_sig_;
    ChannelGate gate_;
    Conv2d conf_head_;
    Sigmoid conf_sig_;

    ParamList params_;
    BufferList buffers_;

    // forward cache
    const Tensor* img_ = nullptr;
    std::vector<const Tensor*> stage_out_;
    std::vector<Tensor> dec_sum_;
    std::vector<const Tensor*> skips_;
    bool train_ = false;
};

} // namespace banet::nn
