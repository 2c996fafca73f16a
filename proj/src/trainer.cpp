#include "banet/trainer.hpp"

#include <cmath>
#include <filesystem>

#include "banet/checkpoint.hpp"
#include "banet/errors.hpp"

namespace banet::train {

namespace {

constexpr double kPi = 3.14159265358979323846;

Planef luma_plane(const Tensor& images, int n) {
    Planef p(images.h(), images.w());
    const float* r = images.plane(n, 0);
    const float* g = images.plane(n, 1);
    const float* b = images.plane(n, 2);
    for (size_t i = 0; i < p.size(); ++i) p.v[i] = (r[i] + g[i] + b[i]) / 3.f;
    return p;
}

void clip_global_norm(const nn::ParamList& params, double clip) {
    double sq = 0;
    for (const nn::Parameter* p : params)
        for (float g : p->g) sq += double(g) * g;
    double norm = std::sqrt(sq);
    if (norm <= clip) return;
    float s = static_cast<float>(clip / norm);
    for (nn::Parameter* p : params)
        for (float& g : p->g) g *= s;
}

} // namespace

Phase phase_from_name(const std::string& s) {
    if (s == "pretrain") return Phase::Pretrain;
    if (s == "finetune") return Phase::Finetune;
    throw UsageError("unknown phase '" + s + "' (want pretrain or finetune)");
}

const char* phase_name(Phase p) { return p == Phase::Pretrain ? "pretrain" : "finetune"; }

Decay decay_from_name(const std::string& s) {
    if (s == "poly") return Decay::Poly;
    if (s == "cosine") return Decay::Cosine;
    if (s == "step") return Decay::Step;
    throw UsageError("unknown decay '" + s + "' (want poly, cosine or step)");
}

const char* decay_name(Decay d) {
    switch (d) {
        case Decay::Poly: return "poly";
        case Decay::Cosine: return "cosine";
        case Decay::Step: return "step";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (lr_max <= 0) throw UsageError("trainer.lr_max must be > 0");
    if (momentum < 0 || momentum >= 1) throw UsageError("trainer.momentum must be in [0,1)");
    if (weight_decay < 0) throw UsageError("trainer.weight_decay must be >= 0");
    if (iterations < 1) throw UsageError("trainer.iterations must be >= 1");
    if (resolved_warmup() >= iterations)
        throw UsageError("trainer.warmup_iterations must be < trainer.iterations");
    if (batch_size < 1) throw UsageError("trainer.batch_size must be >= 1");
    if (poly_power <= 0) throw UsageError("trainer.poly_power must be > 0");
    if (grad_clip < 0) throw UsageError("trainer.grad_clip must be >= 0");
    if (checkpoint_every < 0) throw UsageError("trainer.checkpoint_every must be >= 0");
}

double lr_schedule(long long iter, const TrainConfig& cfg) {
    if (iter < 0 || iter >= cfg.iterations)
        throw UsageError("lr_schedule: iteration out of range");
    long long wu = cfg.resolved_warmup();
    if (iter < wu) return cfg.lr_max * static_cast<double>(iter) / static_cast<double>(wu);
    double t = static_cast<double>(iter - wu) / static_cast<double>(cfg.iterations - wu);
    switch (cfg.decay) {
        case Decay::Poly: return cfg.lr_max * std::pow(1.0 - t, cfg.poly_power);
        case Decay::Cosine: return cfg.lr_max * 0.5 * (1.0 + std::cos(kPi * t));
        case Decay::Step: return cfg.lr_max * (t < 1.0 / 3 ? 1.0 : t < 2.0 / 3 ? 0.1 : 0.01);
    }
    return cfg.lr_max;
}

Sgd::Sgd(nn::ParamList params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    momenta_.reserve(params_.size());
    for (const nn::Parameter* p : params_) momenta_.emplace_back(p->size(), 0.f);
}

void Sgd::step(double lr) {
    const KernelTable& k = active_kernels();
    for (size_t i = 0; i < params_.size(); ++i)
        k.sgd_step(params_[i]->v.data(), momenta_[i].data(), params_[i]->g.data(),
                   static_cast<float>(lr), static_cast<float>(momentum_),
                   static_cast<float>(weight_decay_), params_[i]->size());
}

void Sgd::zero_grad() {
    for (nn::Parameter* p : params_) p->zero_grad();
}

loss::LossReport batch_loss_and_grad(nn::BanetModel& model, const data::Batch& batch,
                                     const loss::LossWeights& weights, bool refine_on,
                                     bool backward) {
    int n = batch.images.n();
    int H = batch.images.h(), W = batch.images.w();
    nn::ForwardOutput out = model.forward(batch.images, /*train=*/backward);
    bool has_att = out.attention != nullptr;

    std::vector<Planef> conf(n), seg(n), att, bnd, mb;
    std::vector<gcl::GradientField<float>> img_f;
    std::vector<gcl::PredGradient<float>> pg;
    if (has_att) {
        att.resize(n);
        bnd.resize(n);
    }
    if (refine_on) {
        mb.resize(n);
        img_f.resize(n);
        pg.resize(n);
    }

    double seg_sum = 0, bound_sum = 0;
    float cos_sum = 0, mag_sum = 0;
    long long cnt = 0;
    for (int j = 0; j < n; ++j) {
        conf[j] = out.confidence->channel_plane(j, 0);
        seg[j] = batch.seg.channel_plane(j, 0);
        seg_sum += loss::bce(conf[j], seg[j]);
        if (has_att) {
            att[j] = out.attention->channel_plane(j, 0);
            bnd[j] = batch.boundary.channel_plane(j, 0);
            bound_sum += loss::bce(att[j], bnd[j]);
        }
        if (refine_on) {
            mb[j] = batch.boundary.channel_plane(j, 0);
            img_f[j] = gcl::gradient_field(img::minmax_normalize(luma_plane(batch.images, j)));
            pg[j] = gcl::prediction_gradient(conf[j]);
            loss::RefineTerms<float> rt =
                loss::refine_terms(img_f[j], pg[j].field, mb[j],
                                   static_cast<float>(weights.lambda));
            cos_sum += rt.cos_sum;
            mag_sum += rt.mag_sum;
            cnt += rt.count;
        }
    }

    loss::LossReport rep;
    rep.seg = seg_sum / n;
    rep.bound = has_att ? bound_sum / n : 0.0;
    if (cnt > 0) {
        rep.cos = static_cast<double>(cos_sum) / cnt;
        rep.mag = static_cast<double>(mag_sum) / cnt;
        rep.refine = weights.gamma1 * rep.cos + weights.gamma2 * rep.mag;
    }
    rep.total = weights.alpha * rep.seg + weights.beta * rep.bound + weights.gamma * rep.refine;

    if (!backward) return rep;

    Tensor d_conf(n, 1, H, W), d_att;
    if (has_att) d_att = Tensor(n, 1, H, W);
    float a_scale = static_cast<float>(weights.alpha / n);
    float b_scale = static_cast<float>(weights.beta / n);
    float g_scale = static_cast<float>(weights.gamma);
    for (int j = 0; j < n; ++j) {
        Planef d = loss::bce_backward(conf[j], seg[j]);
        for (float& v : d.v) v *= a_scale;
        if (refine_on && cnt > 0) {
            Planef dr = loss::refine_backward(conf[j], pg[j], img_f[j], mb[j], weights, cnt);
            for (size_t i = 0; i < d.v.size(); ++i) d.v[i] += g_scale * dr.v[i];
        }
        d_conf.set_channel_plane(j, 0, d);
        if (has_att) {
            Planef db = loss::bce_backward(att[j], bnd[j]);
            for (float& v : db.v) v *= b_scale;
            d_att.set_channel_plane(j, 0, db);
        }
    }
    model.backward(d_conf, d_att);
    return rep;
}

TrainResult train_phase(nn::BanetModel& model, Sgd& opt, const data::Dataset& ds,
                        const TrainConfig& cfg, const loss::LossWeights& weights,
                        const data::AugmentSpec& aug, long long start_iter,
                        const LogSink& sink) {
    cfg.validate();
    bool refine_on = cfg.phase == Phase::Finetune;
    std::filesystem::create_directories(cfg.out_dir);
    TrainResult res;
    res.next_iteration = start_iter;
    auto ckpt_path = [&](long long it) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%06lld", it);
        return cfg.out_dir + "/ckpt_" + phase_name(cfg.phase) + "_" + buf + ".ckpt";
    };
    for (long long it = start_iter; it < cfg.iterations; ++it) {
        double lr = lr_schedule(it, cfg);
        data::BatchPlan plan = data::plan_batch(ds.size(), cfg.batch_size, cfg.seed, it);
        data::Batch batch = ds.make_batch(plan, aug, cfg.seed);
        model.zero_grad();
        loss::LossReport rep = batch_loss_and_grad(model, batch, weights, refine_on, true);
        if (!std::isfinite(rep.total)) {
            std::string snap = cfg.out_dir + "/diagnostic_nonfinite.ckpt";
            save_checkpoint(snap, model, opt, {it, cfg, weights, model.config()});
            throw NumericError("non-finite total loss at iteration " + std::to_string(it) +
                               "; state dumped to " + snap);
        }
        if (cfg.grad_clip > 0) clip_global_norm(model.params(), cfg.grad_clip);
        opt.step(lr);
        if (sink) sink({it, lr, rep});
        res.last = rep;
        res.next_iteration = it + 1;
        bool at_end = it + 1 == cfg.iterations;
        if (at_end || (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)) {
            res.last_checkpoint = ckpt_path(it + 1);
            save_checkpoint(res.last_checkpoint, model, opt,
                            {it + 1, cfg, weights, model.config()});
        }
    }
    return res;
}

} // namespace banet::train
