#include "banet/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "banet/errors.hpp"

namespace banet::eval {

namespace {

Tensor single_image_tensor(const img::Image& im) {
    Tensor t(1, 3, im.h, im.w);
    std::copy(im.data.begin(), im.data.end(), t.data());
    return t;
}

} // namespace

Planef threshold_map(const Planef& confidence, float threshold) {
    Planef out(confidence.h, confidence.w);
    for (size_t i = 0; i < confidence.v.size(); ++i)
        out.v[i] = confidence.v[i] > threshold ? 1.f : 0.f;
    return out;
}

double iou_binary(const Planef& pred_bin, const Planef& target) {
    if (!pred_bin.same_shape(target)) throw DataError("iou: shape mismatch");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < pred_bin.v.size(); ++i) {
        bool p = pred_bin.v[i] != 0.f, t = target.v[i] != 0.f;
        inter += p && t;
        uni += p || t;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const Planef& confidence, const Planef& target, float threshold, bool two_class) {
    Planef pred = threshold_map(confidence, threshold);
    double fg = iou_binary(pred, target);
    if (!two_class) return fg;
    Planef pred_c(pred.h, pred.w), tgt_c(target.h, target.w);
    for (size_t i = 0; i < pred.v.size(); ++i) {
        pred_c.v[i] = 1.f - pred.v[i];
        tgt_c.v[i] = target.v[i] != 0.f ? 0.f : 1.f;
    }
    return 0.5 * (fg + iou_binary(pred_c, tgt_c));
}

EvalReport evaluate(nn::BanetModel& model, const data::Dataset& ds, const EvalConfig& cfg) {
    if (ds.size() == 0) throw DataError("evaluate: empty dataset");
    EvalReport rep;
    rep.param_count = model.param_count();
    rep.param_mb = 4.0 * static_cast<double>(rep.param_count) / (1 << 20);

    for (size_t i = 0; i < ds.size(); ++i) {
        const data::Sample& s = ds.sample(i);
        Tensor in = single_image_tensor(s.image);
        nn::ForwardOutput out = model.forward(in, /*train=*/false);
        Planef conf = out.confidence->channel_plane(0, 0);
        rep.per_image_iou.push_back(iou(conf, s.seg_target.map, cfg.threshold, cfg.two_class));
    }
    double sum = 0;
    for (double v : rep.per_image_iou) sum += v;
    rep.miou = sum / static_cast<double>(rep.per_image_iou.size());

    if (cfg.measure_fps) {
        Tensor in = single_image_tensor(ds.sample(0).image);
        for (int i = 0; i < cfg.fps_warmup; ++i) model.forward(in, false);
        auto t0 = std::chrono::steady_clock::now();
        size_t count = ds.size();
        for (size_t i = 0; i < count; ++i)
            model.forward(single_image_tensor(ds.sample(i).image), false);
        auto t1 = std::chrono::steady_clock::now();
        double secs = std::chrono::duration<double>(t1 - t0).count();
        rep.fps = secs > 0 ? static_cast<double>(count) / secs : 0.0;
    }
    return rep;
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j;
    j["miou"] = r.miou;
    j["fps"] = r.fps;
    j["param_count"] = r.param_count;
    j["param_mb"] = r.param_mb;
    j["per_image_iou"] = r.per_image_iou;
    return j.dump(2);
}

std::vector<AblationRow> ablation_run(const data::Dataset& train_ds,
                                      const data::Dataset& eval_ds, const AblationConfig& cfg,
                                      const loss::LossWeights& weights,
                                      const EvalConfig& eval_cfg) {
    struct Variant {
        const char* name;
        bool attention;
        bool refine;
    };
    const Variant variants[3] = {
        {"base", false, false}, {"+attention", true, false}, {"+attention+refine", true, true}};

    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        nn::ModelConfig mc = nn::ModelConfig::banet(cfg.width);
        mc.use_attention = v.attention;
        nn::BanetModel model(mc, cfg.seed);
        train::Sgd opt(model.params(), 0.9, 1e-4);

        train::TrainConfig tc;
        tc.lr_max = cfg.lr_max;
        tc.iterations = cfg.iterations;
        tc.warmup_iterations = std::max<long long>(1, cfg.iterations / 10);
        tc.batch_size = cfg.batch_size;
        tc.seed = cfg.seed;
        tc.phase = train::Phase::Pretrain;
        tc.checkpoint_every = 0;
        tc.out_dir = "runs/ablation";
        data::AugmentSpec aug;
        aug.enabled = false;

        train::TrainResult tr =
            train::train_phase(model, opt, train_ds, tc, weights, aug, 0, nullptr);
        if (v.refine) {
            tc.phase = train::Phase::Finetune;
            tc.iterations = cfg.refine_iterations;
            tc.warmup_iterations = std::max<long long>(1, cfg.refine_iterations / 10);
            tc.lr_max = cfg.lr_max * 0.5;
            tr = train::train_phase(model, opt, train_ds, tc, weights, aug, 0, nullptr);
        }
        AblationRow row;
        row.name = v.name;
        row.final_loss = tr.last;
        row.report = evaluate(model, eval_ds, eval_cfg);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "| variant | mIoU | params (MB) | final total loss |\n";
    os << "|---|---|---|---|\n";
    for (const AblationRow& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "| %s | %.4f | %.2f | %.6f |\n", r.name.c_str(),
                      r.report.miou, r.report.param_mb, r.final_loss.total);
        os << line;
    }
    return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "variant,miou,param_mb,final_total_loss\n";
    for (const AblationRow& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%.6f,%.4f,%.8f\n", r.name.c_str(), r.report.miou,
                      r.report.param_mb, r.final_loss.total);
        os << line;
    }
    return os.str();
}

} // namespace banet::eval
