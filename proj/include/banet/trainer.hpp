#pragma once

#include <functional>
#include <string>
#include <vector>

#include "banet/dataset.hpp"
#include "banet/losses.hpp"
#include "banet/model.hpp"

namespace banet::train {

enum class Phase { Pretrain, Finetune };
enum class Decay { Poly, Cosine, Step };

Phase phase_from_name(const std::string& s);
const char* phase_name(Phase p);
Decay decay_from_name(const std::string& s);
const char* decay_name(Decay d);

struct TrainConfig {
    double lr_max = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    long long iterations = 40000; // per phase
    long long warmup_iterations = -1; // -1: 5% of iterations
    int batch_size = 16;
    uint64_t seed = 1;
    Phase phase = Phase::Pretrain;
    Decay decay = Decay::Poly;
    double poly_power = 0.9;
    double grad_clip = 0.0; // 0: off
    long long checkpoint_every = 1000;
    std::string out_dir = "runs/default";

    long long resolved_warmup() const {
        return warmup_iterations >= 0 ? warmup_iterations : iterations / 20;
    }
    void validate() const;
};

// Linear ramp 0 -> lr_max over the warmup, then decay to 0 over the rest
// (poly with the configured power by default).
double lr_schedule(long long iter, const TrainConfig& cfg);

class Sgd {
public:
    Sgd(nn::ParamList params, double momentum, double weight_decay);
    void step(double lr);
    void zero_grad();
    std::vector<std::vector<float>>& momenta() { return momenta_; }

private:
    nn::ParamList params_;
    std::vector<std::vector<float>> momenta_;
    double momentum_, weight_decay_;
};

struct IterationLog {
    long long iteration = 0;
    double lr = 0;
    loss::LossReport report;
};

using LogSink = std::function<void(const IterationLog&)>;

struct TrainResult {
    long long next_iteration = 0;
    loss::LossReport last;
    std::string last_checkpoint;
};

// Runs iterations [start_iter, cfg.iterations). Refine gating follows
// cfg.phase. Checkpoints land in cfg.out_dir when checkpoint_every > 0 or a
// non-finite loss aborts (diagnostic snapshot, then NumericError).
TrainResult train_phase(nn::BanetModel& model, Sgd& opt, const data::Dataset& ds,
                        const TrainConfig& cfg, const loss::LossWeights& weights,
                        const data::AugmentSpec& aug, long long start_iter,
                        const LogSink& sink);

// One forward/loss/backward on an assembled batch; gradients land in the
// model, the pooled report is returned. Exposed for tests and the evaluator.
loss::LossReport batch_loss_and_grad(nn::BanetModel& model, const data::Batch& batch,
                                     const loss::LossWeights& weights, bool refine_on,
                                     bool backward = true);

} // namespace banet::train
