#include "banet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "banet/boundary.hpp"
#include "banet/errors.hpp"

namespace fs = std::filesystem;

namespace banet::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool has_image_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".png" || e == ".jpg" || e == ".jpeg";
}

// symmetric reflect (edge pixels included), valid for any offset
int reflect(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

Planef binarize(const Planef& m) {
    Planef out(m.h, m.w);
    for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] > 0.5f ? 1.f : 0.f;
    return out;
}

} // namespace

Layout layout_from_name(const std::string& name) {
    if (name == "folder_pairs") return Layout::FolderPairs;
    if (name == "pfcn_like") return Layout::PfcnLike;
    throw UsageError("unknown dataset layout '" + name + "' (want folder_pairs or pfcn_like)");
}

const char* layout_name(Layout l) {
    return l == Layout::FolderPairs ? "folder_pairs" : "pfcn_like";
}

std::vector<IndexEntry> scan_dataset(const std::string& root, Layout layout) {
    if (!fs::is_directory(root)) throw DataError("dataset root " + root + " is not a directory");
    std::vector<IndexEntry> out;
    if (layout == Layout::FolderPairs) {
        fs::path images = fs::path(root) / "images";
        fs::path masks = fs::path(root) / "masks";
        if (!fs::is_directory(images) || !fs::is_directory(masks))
            throw DataError("folder_pairs layout needs " + root + "/images and /masks");
        for (const auto& de : fs::directory_iterator(images)) {
            if (!de.is_regular_file() || !has_image_ext(de.path())) continue;
            std::string stem = de.path().stem().string();
            fs::path mask = masks / (stem + ".png");
            if (!fs::exists(mask))
                throw DataError("image '" + stem + "' has no mask " + mask.string());
            out.push_back({de.path().string(), mask.string(), stem});
        }
    } else {
        for (const auto& de : fs::directory_iterator(root)) {
            if (!de.is_regular_file() || !has_image_ext(de.path())) continue;
            std::string stem = de.path().stem().string();
            if (stem.size() > 6 && stem.substr(stem.size() - 6) == "_matte") continue;
            fs::path mask = de.path().parent_path() / (stem + "_matte.png");
            if (!fs::exists(mask))
                throw DataError("image '" + stem + "' has no mask " + mask.string());
            out.push_back({de.path().string(), mask.string(), stem});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.stem < b.stem; });
    if (out.empty()) throw DataError("empty dataset at " + root);
    return out;
}

img::Image rotate_image(const img::Image& in, float deg) {
    img::Image out(in.h, in.w);
    double th = deg * kPi / 180.0;
    double c = std::cos(th), s = std::sin(th);
    double cy = (in.h - 1) / 2.0, cx = (in.w - 1) / 2.0;
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            // inverse map: rotate output coords by -theta around center
            double dy = y - cy, dx = x - cx;
            double sx = cx + c * dx + s * dy;
            double sy = cy - s * dx + c * dy;
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            float tx = static_cast<float>(sx - x0), ty = static_cast<float>(sy - y0);
            int x0r = reflect(x0, in.w), x1r = reflect(x0 + 1, in.w);
            int y0r = reflect(y0, in.h), y1r = reflect(y0 + 1, in.h);
            for (int ch = 0; ch < 3; ++ch) {
                float a = in.at(ch, y0r, x0r), b = in.at(ch, y0r, x1r);
                float d = in.at(ch, y1r, x0r), e = in.at(ch, y1r, x1r);
                float top = a + tx * (b - a);
                float bot = d + tx * (e - d);
                out.at(ch, y, x) = top + ty * (bot - top);
            }
        }
    return out;
}

Planef rotate_mask(const Planef& in, float deg) {
    Planef out(in.h, in.w);
    double th = deg * kPi / 180.0;
    double c = std::cos(th), s = std::sin(th);
    double cy = (in.h - 1) / 2.0, cx = (in.w - 1) / 2.0;
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            double dy = y - cy, dx = x - cx;
            double sx = cx + c * dx + s * dy;
            double sy = cy - s * dx + c * dy;
            int xi = static_cast<int>(std::lround(sx)), yi = static_cast<int>(std::lround(sy));
            out.at(y, x) =
                (xi >= 0 && xi < in.w && yi >= 0 && yi < in.h) ? in.at(yi, xi) : 0.f;
        }
    return out;
}

img::Image flip_image(const img::Image& in) {
    img::Image out(in.h, in.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) out.at(c, y, x) = in.at(c, y, in.w - 1 - x);
    return out;
}

Planef flip_mask(const Planef& in) {
    Planef out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) out.at(y, x) = in.at(y, in.w - 1 - x);
    return out;
}

Sample augment(const Sample& s, const AugmentSpec& spec, Pcg32& rng, int canonical_width) {
    if (!spec.enabled) return s;
    Sample out;
    out.source_id = s.source_id;
    float deg = rng.uniform(-spec.rotation_deg, spec.rotation_deg);
    bool flip = rng.next_float() < spec.flip_prob;
    float light = rng.uniform(spec.light_lo, spec.light_hi);

    img::Image im = deg != 0.f ? rotate_image(s.image, deg) : s.image;
    Planef m = deg != 0.f ? rotate_mask(s.seg_target.map, deg) : s.seg_target.map;
    if (flip) {
        im = flip_image(im);
        m = flip_mask(m);
    }
    for (float& v : im.data) v = std::clamp(v * light, 0.f, 1.f);

    out.image = std::move(im);
    out.seg_target = img::MaskMap(binarize(m), img::MaskRole::SegTarget);
    out.boundary_target = boundary::make_boundary_target(out.seg_target, canonical_width);
    return out;
}

img::Image pad_image_to_multiple(const img::Image& im, int multiple, PadRecord& rec) {
    int H = (im.h + multiple - 1) / multiple * multiple;
    int W = (im.w + multiple - 1) / multiple * multiple;
    rec = {H - im.h, W - im.w, im.h, im.w};
    if (H == im.h && W == im.w) return im;
    img::Image out(H, W);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.at(c, y, x) = im.at(c, reflect(y, im.h), reflect(x, im.w));
    return out;
}

Sample pad_to_multiple(const Sample& s, int multiple, PadRecord& rec) {
    Sample out;
    out.source_id = s.source_id;
    out.image = pad_image_to_multiple(s.image, multiple, rec);
    if (rec.bottom == 0 && rec.right == 0) {
        out.seg_target = s.seg_target;
        out.boundary_target = s.boundary_target;
        return out;
    }
    auto pad_zero = [&](const Planef& m) {
        Planef p(out.image.h, out.image.w);
        for (int y = 0; y < m.h; ++y)
            std::copy(&m.at(y, 0), &m.at(y, 0) + m.w, &p.at(y, 0));
        return p;
    };
    out.seg_target = img::MaskMap(pad_zero(s.seg_target.map), img::MaskRole::SegTarget);
    out.boundary_target =
        img::MaskMap(pad_zero(s.boundary_target.map), img::MaskRole::BoundaryTarget);
    return out;
}

Planef crop_back(const Planef& pred, const PadRecord& rec) {
    if (pred.h != rec.orig_h + rec.bottom || pred.w != rec.orig_w + rec.right)
        throw DataError("crop_back: prediction dims do not match pad record");
    if (rec.bottom == 0 && rec.right == 0) return pred;
    Planef out(rec.orig_h, rec.orig_w);
    for (int y = 0; y < out.h; ++y)
        std::copy(&pred.at(y, 0), &pred.at(y, 0) + out.w, &out.at(y, 0));
    return out;
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, uint64_t epoch) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Pcg32 rng(mix_seed(seed, 0xe90c, epoch));
    rng.shuffle(order);
    return order;
}

long long slots_per_epoch(size_t n, int batch_size) {
    return static_cast<long long>((n + batch_size - 1) / batch_size);
}

BatchPlan plan_batch(size_t n, int batch_size, uint64_t seed, long long iteration) {
    if (n == 0) throw DataError("plan_batch: empty dataset");
    if (batch_size < 1) throw UsageError("plan_batch: batch_size must be >= 1");
    long long slots = slots_per_epoch(n, batch_size);
    BatchPlan plan;
    plan.epoch = static_cast<uint64_t>(iteration / slots);
    long long slot = iteration % slots;
    std::vector<size_t> order = epoch_order(n, seed, plan.epoch);
    size_t lo = static_cast<size_t>(slot) * batch_size;
    size_t hi = std::min(n, lo + batch_size);
    for (size_t p = lo; p < hi; ++p) {
        plan.indices.push_back(order[p]);
        plan.positions.push_back(p);
    }
    return plan;
}

Dataset::Dataset(std::vector<IndexEntry> entries, int resolution, int canonical_width)
    : entries_(std::move(entries)), cache_(entries_.size()), resolution_(resolution),
      canonical_width_(canonical_width) {
    if (entries_.empty()) throw DataError("empty dataset");
    if (resolution_ < 32 || resolution_ % 32)
        throw UsageError("dataset resolution must be a positive multiple of 32");
}

Dataset::Dataset(std::vector<Sample> samples, int canonical_width)
    : samples_(std::move(samples)), canonical_width_(canonical_width) {
    if (samples_.empty()) throw DataError("empty dataset");
}

const Sample& Dataset::sample(size_t i) const {
    if (!samples_.empty()) return samples_.at(i);
    auto& slot = cache_.at(i);
    if (!slot) {
        const IndexEntry& e = entries_[i];
        Sample s;
        s.source_id = e.stem;
        img::Image raw = img::load_image(e.image_path);
        img::MaskMap m = img::load_mask(e.mask_path, img::MaskRole::SegTarget);
        if (m.map.h != raw.h || m.map.w != raw.w)
            throw DataError("sample '" + e.stem + "': image and mask dims differ");
        s.image = img::resize_bilinear(raw, resolution_, resolution_);
        s.seg_target = img::MaskMap(
            binarize(img::resize_nearest(m.map, resolution_, resolution_)),
            img::MaskRole::SegTarget);
        s.boundary_target = boundary::make_boundary_target(s.seg_target, canonical_width_);
        slot = std::move(s);
    }
    return *slot;
}

Batch Dataset::make_batch(const BatchPlan& plan, const AugmentSpec& aug, uint64_t seed) const {
    if (plan.indices.empty()) throw DataError("make_batch: empty plan");
    int n = static_cast<int>(plan.indices.size());
    Batch b;
    for (int j = 0; j < n; ++j) {
        const Sample& base = sample(plan.indices[j]);
        Sample s;
        const Sample* use = &base;
        if (aug.enabled) {
            Pcg32 rng(mix_seed(seed, plan.epoch, plan.positions[j]));
            s = augment(base, aug, rng, canonical_width_);
            use = &s;
        }
        if (j == 0) {
            b.images = Tensor(n, 3, use->image.h, use->image.w);
            b.seg = Tensor(n, 1, use->image.h, use->image.w);
            b.boundary = Tensor(n, 1, use->image.h, use->image.w);
        }
        if (use->image.h != b.images.h() || use->image.w != b.images.w())
            throw DataError("make_batch: heterogeneous sample dims");
        std::copy(use->image.data.begin(), use->image.data.end(), b.images.plane(j, 0));
        std::copy(use->seg_target.map.v.begin(), use->seg_target.map.v.end(), b.seg.plane(j, 0));
        std::copy(use->boundary_target.map.v.begin(), use->boundary_target.map.v.end(),
                  b.boundary.plane(j, 0));
        b.ids.push_back(use->source_id);
    }
    return b;
}

} // namespace banet::data
