#pragma once

#include <string>
#include <vector>

#include "banet/dataset.hpp"
#include "banet/losses.hpp"
#include "banet/model.hpp"
#include "banet/trainer.hpp"

namespace banet::cfg {

// Fully resolved run configuration: file values overlaid by CLI --set
// overrides. Sections mirror the subsystems: [data], [model], [loss],
// [trainer], [boundary]. Defaults are the published training constants.
struct RunConfig {
    // [data]
    std::string data_root;
    std::string data_layout = "folder_pairs";
    int resolution = 512;
    data::AugmentSpec augment;

    // [model]
    std::string model_preset = "banet64"; // banet64 | banet512 | custom
    int model_width = 64;                 // read when preset == custom
    bool use_attention = true;

    // [loss] (temperature lives here and feeds the attention head)
    loss::LossWeights loss;

    // [trainer]
    train::TrainConfig trainer;

    // [boundary]
    int canonical_width = 50;

    nn::ModelConfig model_config() const;
    data::Layout layout() const;
    void validate() const; // UsageError with section.key paths
    std::string to_string() const; // INI text; parses back to the same config
};

// Parses "# comment", "; comment", "[section]" and "key = value" lines.
// Unknown keys and malformed values raise UsageError naming the line and the
// section.key path. batch_size is accepted under [data] as an alias for
// trainer.batch_size.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

// assignment: "section.key=value"
void apply_override(RunConfig& c, const std::string& assignment);

// Empty path: defaults. Overrides applied in order, then validate().
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

} // namespace banet::cfg
