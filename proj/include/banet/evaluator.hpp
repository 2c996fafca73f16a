#pragma once

#include <string>
#include <vector>

#include "banet/dataset.hpp"
#include "banet/model.hpp"
#include "banet/trainer.hpp"

namespace banet::eval {

struct EvalConfig {
    float threshold = 0.5f;
    bool two_class = false; // (fg IoU + bg IoU)/2 instead of fg only
    bool measure_fps = true;
    int fps_warmup = 10;
};

struct EvalReport {
    double miou = 0;
    double fps = 0;
    size_t param_count = 0;
    double param_mb = 0; // 4 bytes/scalar
    std::vector<double> per_image_iou;
};

// |pred ∩ target| / |pred ∪ target| on binary planes; empty union -> 1.0.
double iou_binary(const Planef& pred_bin, const Planef& target);
double iou(const Planef& confidence, const Planef& target, float threshold = 0.5f,
           bool two_class = false);

Planef threshold_map(const Planef& confidence, float threshold);

// Batch-1 eval-mode forwards over the whole dataset. FPS timed after
// fps_warmup warm-up forwards.
EvalReport evaluate(nn::BanetModel& model, const data::Dataset& ds, const EvalConfig& cfg);

std::string report_json(const EvalReport& r);

// Ablation variants: base (no attention head, no boundary/refine losses),
// +attention (boundary loss on), full (+ refine fine-tuning phase).
struct AblationRow {
    std::string name;
    EvalReport report;
    loss::LossReport final_loss;
};

struct AblationConfig {
    int width = 64;
    long long iterations = 60; // per variant (pretrain; full adds a refine phase)
    long long refine_iterations = 20;
    int batch_size = 4;
    double lr_max = 0.05;
    uint64_t seed = 1;
};

std::vector<AblationRow> ablation_run(const data::Dataset& train_ds,
                                      const data::Dataset& eval_ds, const AblationConfig& cfg,
                                      const loss::LossWeights& weights,
                                      const EvalConfig& eval_cfg);

std::string ablation_markdown(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

} // namespace banet::eval
