#pragma once

#include <string>
#include <vector>

#include "banet/dataset.hpp"
#include "banet/image.hpp"

namespace banet::synth {

struct SynthSpec {
    int count = 8;
    int size = 128;
    uint64_t seed = 7;
    bool discs = true;
    bool heads = true; // head-shoulders two-ellipse family
    void validate() const;
};

struct Generated {
    img::Image image;
    img::MaskMap mask;
    std::string name;
    std::string family;
};

// Shape rasterizers (pixel-center test, exact masks).
Planef disc_mask(int size, double cx, double cy, double r);
Planef head_shoulders_mask(int size, double cx, double head_cy, double head_rx, double head_ry,
                           double sh_cy, double sh_rx, double sh_ry);

// Deterministic per (spec.seed, index): same spec regenerates the same bytes.
Generated make_sample(const SynthSpec& spec, uint64_t index);

// Writes folder_pairs layout (images/, masks/) plus manifest.json.
void write_dataset(const SynthSpec& spec, const std::string& out_root);

// In-memory dataset with boundary targets attached.
data::Dataset make_dataset(const SynthSpec& spec, int canonical_width);

} // namespace banet::synth
