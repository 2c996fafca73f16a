#pragma once

#include <optional>
#include <string>
#include <vector>

#include "banet/image.hpp"
#include "banet/rng.hpp"
#include "banet/tensor.hpp"

namespace banet::data {

struct AugmentSpec {
    bool enabled = true;
    float rotation_deg = 45.f; // draw from [-r, +r]
    float flip_prob = 0.5f;
    float light_lo = 0.7f, light_hi = 1.3f;
};

struct Sample {
    img::Image image;
    img::MaskMap seg_target;
    img::MaskMap boundary_target;
    std::string source_id;
};

// All padding goes on the bottom/right edge; crop-back takes the top-left
// orig_h x orig_w region.
struct PadRecord {
    int bottom = 0, right = 0;
    int orig_h = 0, orig_w = 0;
};

enum class Layout { FolderPairs, PfcnLike };

Layout layout_from_name(const std::string& name);
const char* layout_name(Layout l);

struct IndexEntry {
    std::string image_path;
    std::string mask_path;
    std::string stem;
};

// folder_pairs: root/images/<stem>.{png,jpg,jpeg} paired with
// root/masks/<stem>.png. pfcn_like: flat directory of <stem>.{png,jpg,jpeg}
// paired with <stem>_matte.png. Entries sorted by stem.
std::vector<IndexEntry> scan_dataset(const std::string& root, Layout layout);

// Geometric transforms used by augmentation (exposed for tests).
img::Image rotate_image(const img::Image& in, float deg);   // bilinear, reflect fill
Planef rotate_mask(const Planef& in, float deg);            // nearest, zero fill
img::Image flip_image(const img::Image& in);
Planef flip_mask(const Planef& in);

// Draw order is fixed: rotation angle, flip coin, lightness factor. The
// boundary target is regenerated from the transformed seg target.
Sample augment(const Sample& s, const AugmentSpec& spec, Pcg32& rng, int canonical_width);

Sample pad_to_multiple(const Sample& s, int multiple, PadRecord& rec);
img::Image pad_image_to_multiple(const img::Image& im, int multiple, PadRecord& rec);
Planef crop_back(const Planef& pred, const PadRecord& rec);

struct Batch {
    Tensor images;   // N,3,H,W
    Tensor seg;      // N,1,H,W
    Tensor boundary; // N,1,H,W
    std::vector<std::string> ids;
};

// Stateless epoch composition: batch k lives in epoch k / slots_per_epoch,
// slot k % slots_per_epoch, over a per-epoch Fisher-Yates order seeded by
// (seed, epoch). The trailing partial batch is kept.
std::vector<size_t> epoch_order(size_t n, uint64_t seed, uint64_t epoch);
long long slots_per_epoch(size_t n, int batch_size);

struct BatchPlan {
    uint64_t epoch = 0;
    std::vector<size_t> indices;   // dataset indices
    std::vector<size_t> positions; // position within the epoch, keys augment rng
};

BatchPlan plan_batch(size_t n, int batch_size, uint64_t seed, long long iteration);

class Dataset {
public:
    // Lazy disk-backed dataset; samples resized to resolution x resolution
    // (image bilinear, mask nearest then re-binarized) and memoized.
    Dataset(std::vector<IndexEntry> entries, int resolution, int canonical_width);
    // Preloaded in-memory dataset (synthetic benches).
    Dataset(std::vector<Sample> samples, int canonical_width);

    size_t size() const { return entries_.empty() ? samples_.size() : entries_.size(); }
    int canonical_width() const { return canonical_width_; }
    const Sample& sample(size_t i) const;

    Batch make_batch(const BatchPlan& plan, const AugmentSpec& aug, uint64_t seed) const;

private:
    std::vector<IndexEntry> entries_;
    mutable std::vector<std::optional<Sample>> cache_;
    std::vector<Sample> samples_;
    int resolution_ = 0;
    int canonical_width_ = 50;
};

} // namespace banet::data
