#pragma once

#include <memory>
#include <string>

#include "banet/losses.hpp"
#include "banet/model.hpp"
#include "banet/trainer.hpp"

namespace banet::train {

// Binary container: magic, JSON header (configs, iteration, blob table),
// float blobs for parameters / momenta / BN buffers, FNV-1a64 trailer over
// everything before the hash.
inline constexpr const char* kCheckpointMagic = "BANETCK1";

struct CheckpointMeta {
    long long iteration = 0;
    TrainConfig train_cfg;
    loss::LossWeights weights;
    nn::ModelConfig model_cfg;
};

void save_checkpoint(const std::string& path, nn::BanetModel& model, Sgd& opt,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::unique_ptr<nn::BanetModel> model;
    std::unique_ptr<Sgd> opt;
};

// Verifies the hash, rebuilds the model from the stored config, restores
// parameters, optimizer momenta and BN buffers bitwise.
LoadedCheckpoint load_checkpoint(const std::string& path);

uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 14695981039346656037ULL);

} // namespace banet::train
