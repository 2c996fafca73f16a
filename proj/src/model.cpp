#include "banet/model.hpp"

#include <algorithm>

#include "banet/errors.hpp"

namespace banet::nn {

namespace {

const KernelTable& K() {
    static const KernelTable& t = active_kernels();
    return t;
}

} // namespace

ModelConfig ModelConfig::banet(int width) {
    if (width < 16 || width % 16 != 0)
        throw UsageError("model width must be a positive multiple of 16");
    ModelConfig cfg;
    cfg.width = width;
    cfg.stem_channels = std::max(16, width / 16);
    int c = cfg.stem_channels;
    const int blocks[4] = {2, 2, 3, 3};
    for (int i = 0; i < 4; ++i) {
        c = std::min(width, c * 2);
        int mid = (c == width && i >= 2) ? c : c / 2;
        cfg.stages.push_back({c, blocks[i], mid});
    }
    return cfg;
}

BanetModel::BanetModel(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      stem_("stem", 3, cfg.stem_channels, 3, 2, 1),
      refine_("dec.refine", cfg.stages.back().channels, cfg.stages.back().channels, 3, 1, 1),
      att_head_("att.head", cfg.stages.back().channels, 1, 1, 1, 0, /*bias=*/true),
      att_sig_(cfg.temperature),
      mine1_("mine.c1", cfg.use_attention ? 4 : 3, cfg.mining_channels, 3, 1, 1),
      mine2_("mine.c2", cfg.mining_channels, cfg.mining_channels, 3, 1, 1),
      reduce_("fuse.reduce", cfg.stages.back().channels, cfg.reduce_channels, 1, 1, 0),
      fuse_("fuse.conv", cfg.reduce_channels + cfg.mining_channels, cfg.fusion_channels, 3, 1,
            1),
      gate1_("fuse.gate1", cfg.fusion_channels, cfg.fusion_channels, 1, 1, 0, /*bias=*/true),
      gate2_("fuse.gate2", cfg.fusion_channels, cfg.fusion_channels, 1, 1, 0, /*bias=*/true),
      conf_head_("conf.head", cfg.fusion_channels, 1, 1, 1, 0, /*bias=*/true),
      conf_sig_(1.f) {
    if (cfg.stages.size() != 4) throw UsageError("model needs exactly four stages");
    int cin = cfg.stem_channels;
    for (size_t i = 0; i < cfg.stages.size(); ++i) {
        const StageSpec& s = cfg.stages[i];
        stages_.emplace_back("s" + std::to_string(4 << i), cin, s.channels, s.mid, s.blocks);
        cin = s.channels;
    }
    int deep = cfg.stages.back().channels;
    skip_proj_.resize(3);
    dec_up_.resize(3);
    for (int i = 0; i < 3; ++i)
        if (cfg.stages[i].channels != deep)
            skip_proj_[i] = std::make_unique<ConvBnRelu>("dec.proj" + std::to_string(4 << i),
                                                         cfg.stages[i].channels, deep, 1, 1, 0,
                                                         /*relu=*/false);
    stage_out_.resize(4, nullptr);
    dec_sum_.resize(3);

    Pcg32 rng(seed);
    stem_.init(rng);
    for (auto& s : stages_) s.init(rng);
    for (auto& p : skip_proj_)
        if (p) p->init(rng);
    refine_.init(rng);
    if (cfg.use_attention) att_head_.init(rng);
    mine1_.init(rng);
    mine2_.init(rng);
    reduce_.init(rng);
    fuse_.init(rng);
    gate1_.init(rng);
    gate2_.init(rng);
    conf_head_.init(rng);

    stem_.collect(params_, buffers_);
    for (auto& s : stages_) s.collect(params_, buffers_);
    for (auto& p : skip_proj_)
        if (p) p->collect(params_, buffers_);
    refine_.collect(params_, buffers_);
    if (cfg.use_attention) att_head_.collect(params_);
    mine1_.collect(params_, buffers_);
    mine2_.collect(params_, buffers_);
    reduce_.collect(params_, buffers_);
    fuse_.collect(params_, buffers_);
    gate1_.collect(params_);
    gate2_.collect(params_);
    conf_head_.collect(params_);
}

size_t BanetModel::param_count() const {
    size_t n = 0;
    for (const Parameter* p : params_) n += p->size();
    return n;
}

void BanetModel::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

ForwardOutput BanetModel::forward(const Tensor& img, bool train) {
    if (img.c() != 3) throw DataError("model input must have 3 channels");
    if (img.h() < 32 || img.w() < 32 || img.h() % 32 || img.w() % 32)
        throw DataError("model input dims must be multiples of 32 and at least 32");
    train_ = train;
    img_ = &img;
    int H = img.h(), W = img.w();

    const Tensor* t = &stem_.forward(img, train);
    for (size_t i = 0; i < stages_.size(); ++i) {
        t = &stages_[i].forward(*t, train);
        stage_out_[i] = t;
    }

    const Tensor* d = stage_out_[3];
    for (int i = 2; i >= 0; --i) {
        const Tensor& up = dec_up_[i].forward(*d, stage_out_[i]->h(), stage_out_[i]->w());
        const Tensor& sk =
            skip_proj_[i] ? skip_proj_[i]->forward(*stage_out_[i], train) : *stage_out_[i];
        if (!dec_sum_[i].same_shape(up)) dec_sum_[i] = Tensor(up.n(), up.c(), up.h(), up.w());
        K().add(up.data(), sk.data(), dec_sum_[i].data(), dec_sum_[i].size());
        d = &dec_sum_[i];
    }
    const Tensor& sem = refine_.forward(*d, train);

    ForwardOutput out;
    const Tensor* mine_in = &img;
    if (cfg_.use_attention) {
        const Tensor& alog4 = att_head_.forward(sem);
        const Tensor& alog = att_up_.forward(alog4, H, W);
        const Tensor& att = att_sig_.forward(alog);
        out.attention = &att;
        out.attention_logits = &alog;
        mine_in = &mine_cat_.forward(img, att);
    }
    const Tensor& low = mine2_.forward(mine1_.forward(*mine_in, train), train);

    const Tensor& red = reduce_.forward(sem, train);
    const Tensor& red_up = red_up_.forward(red, H, W);
    const Tensor& cat = fuse_cat_.forward(red_up, low);
    const Tensor& feat = fuse_.forward(cat, train);
    const Tensor& gv = gap_.forward(feat);
    const Tensor& g1 = gate_relu_.forward(gate1_.forward(gv));
    const Tensor& ga = gate_sig_.forward(gate2_.forward(g1));
    const Tensor& fused = gate_.forward(feat, ga);
    const Tensor& conf = conf_sig_.forward(conf_head_.forward(fused));
    out.confidence = &conf;
    return out;
}

void BanetModel::backward(const Tensor& d_conf, const Tensor& d_att) {
    Tensor dclog, dfused;
    conf_sig_.backward(d_conf, dclog);
    conf_head_.backward(dclog, dfused);

    Tensor dfeat, dga, dg2, dg1r, dg1, dgv, dfeat_b;
    gate_.backward(dfused, dfeat, dga);
    gate_sig_.backward(dga, dg2);
    gate2_.backward(dg2, dg1r);
    gate_relu_.backward(dg1r, dg1);
    gate1_.backward(dg1, dgv);
    gap_.backward(dgv, dfeat_b);
    K().add(dfeat.data(), dfeat_b.data(), dfeat.data(), dfeat.size());

    Tensor dcat, dred_up, dlow, dred, dsem;
    fuse_.backward(dfeat, dcat);
    fuse_cat_.backward(dcat, dred_up, dlow);
    red_up_.backward(dred_up, dred);
    reduce_.backward(dred, dsem);

    Tensor dm1, dmine_in;
    mine2_.backward(dlow, dm1);
    mine1_.backward(dm1, dmine_in);

    if (cfg_.use_attention) {
        Tensor dimg_drop, datt;
        mine_cat_.backward(dmine_in, dimg_drop, datt);
        if (d_att.size()) {
            if (!d_att.same_shape(datt)) throw DataError("attention grad shape mismatch");
            K().add(datt.data(), d_att.data(), datt.data(), datt.size());
        }
        Tensor dalog, dalog4, dsem_b;
        att_sig_.backward(datt, dalog);
        att_up_.backward(dalog, dalog4);
        att_head_.backward(dalog4, dsem_b);
        K().add(dsem.data(), dsem_b.data(), dsem.data(), dsem.size());
    } else if (d_att.size()) {
        throw UsageError("attention gradient supplied to a model without the attention head");
    }

    Tensor ddec;
    refine_.backward(dsem, ddec);

    std::vector<Tensor> ds(4);
    for (int i = 0; i < 3; ++i) {
        if (skip_proj_[i])
            skip_proj_[i]->backward(ddec, ds[i]);
        else
            ds[i] = ddec;
        Tensor deeper;
        dec_up_[i].backward(ddec, deeper);
        ddec = std::move(deeper);
    }
    ds[3] = std::move(ddec);

    for (int i = 3; i >= 1; --i) {
        Tensor din;
        stages_[i].backward(ds[i], din);
        K().add(ds[i - 1].data(), din.data(), ds[i - 1].data(), ds[i - 1].size());
    }
    Tensor dstem_out, dimg;
    stages_[0].backward(ds[0], dstem_out);
    stem_.backward(dstem_out, dimg);
}

} // namespace banet::nn
