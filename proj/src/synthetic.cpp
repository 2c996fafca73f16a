#include "banet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "banet/boundary.hpp"
#include "banet/errors.hpp"
#include "banet/rng.hpp"

namespace fs = std::filesystem;

namespace banet::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

// stateless Box-Muller draw (two uniforms per normal)
float normal_draw(Pcg32& rng) {
    double u1 = rng.next_double();
    double u2 = rng.next_double();
    if (u1 < 1e-12) u1 = 1e-12;
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2));
}

struct Rgb {
    float r, g, b;
    float luma() const { return (r + g + b) / 3.f; }
};

Rgb random_color(Pcg32& rng) {
    return {rng.next_float(), rng.next_float(), rng.next_float()};
}

// Foreground color with guaranteed luma contrast against the background.
Rgb contrast_color(Pcg32& rng, float bg_luma) {
    float shift = 0.3f + 0.4f * rng.next_float();
    float target = bg_luma > 0.5f ? bg_luma - shift : bg_luma + shift;
    target = std::clamp(target, 0.f, 1.f);
    Rgb c;
    c.r = std::clamp(target + 0.1f * (rng.next_float() - 0.5f), 0.f, 1.f);
    c.g = std::clamp(target + 0.1f * (rng.next_float() - 0.5f), 0.f, 1.f);
    c.b = std::clamp(3.f * target - c.r - c.g, 0.f, 1.f);
    return c;
}

} // namespace

void SynthSpec::validate() const {
    if (count < 1) throw UsageError("synthetic count must be >= 1");
    if (size < 32 || size % 32) throw UsageError("synthetic size must be a positive multiple of 32");
    if (!discs && !heads) throw UsageError("at least one shape family must be enabled");
}

Planef disc_mask(int size, double cx, double cy, double r) {
    Planef m(size, size);
    double r2 = r * r;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double dx = x - cx, dy = y - cy;
            m.at(y, x) = dx * dx + dy * dy <= r2 ? 1.f : 0.f;
        }
    return m;
}

Planef head_shoulders_mask(int size, double cx, double head_cy, double head_rx, double head_ry,
                           double sh_cy, double sh_rx, double sh_ry) {
    Planef m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double hx = (x - cx) / head_rx, hy = (y - head_cy) / head_ry;
            double sx = (x - cx) / sh_rx, sy = (y - sh_cy) / sh_ry;
            m.at(y, x) = (hx * hx + hy * hy <= 1.0 || sx * sx + sy * sy <= 1.0) ? 1.f : 0.f;
        }
    return m;
}

Generated make_sample(const SynthSpec& spec, uint64_t index) {
    spec.validate();
    Pcg32 rng(mix_seed(spec.seed, 0x5b17, index));
    int S = spec.size;

    bool use_disc;
    if (spec.discs && spec.heads)
        use_disc = rng.next_below(2) == 0;
    else
        use_disc = spec.discs;

    Planef mask;
    std::string family;
    if (use_disc) {
        family = "disc";
        double r = S * (0.15 + 0.15 * rng.next_double());
        double cx = S * (0.35 + 0.3 * rng.next_double());
        double cy = S * (0.35 + 0.3 * rng.next_double());
        mask = disc_mask(S, cx, cy, r);
    } else {
        family = "head_shoulders";
        double cx = S * (0.4 + 0.2 * rng.next_double());
        double head_ry = S * (0.12 + 0.06 * rng.next_double());
        double head_rx = head_ry * (0.75 + 0.2 * rng.next_double());
        double head_cy = S * (0.28 + 0.1 * rng.next_double());
        double sh_cy = head_cy + head_ry * (1.6 + 0.4 * rng.next_double());
        double sh_rx = head_rx * (2.0 + 0.6 * rng.next_double());
        double sh_ry = head_ry * (1.3 + 0.5 * rng.next_double());
        mask = head_shoulders_mask(S, cx, head_cy, head_rx, head_ry, sh_cy, sh_rx, sh_ry);
    }

    Rgb bg = random_color(rng);
    Rgb bg2 = random_color(rng);
    Rgb fg = contrast_color(rng, bg.luma());
    int bg_kind = static_cast<int>(rng.next_below(3)); // 0 flat, 1 gradient, 2 noise
    float sigma = 0.02f + 0.04f * rng.next_float();
    bool vertical = rng.next_below(2) == 0;

    img::Image im(S, S);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            Rgb px = bg;
            if (bg_kind == 1) {
                float t = vertical ? static_cast<float>(y) / (S - 1)
                                   : static_cast<float>(x) / (S - 1);
                px = {bg.r + t * (bg2.r - bg.r), bg.g + t * (bg2.g - bg.g),
                      bg.b + t * (bg2.b - bg.b)};
            } else if (bg_kind == 2) {
                px = {std::clamp(bg.r + sigma * normal_draw(rng), 0.f, 1.f),
                      std::clamp(bg.g + sigma * normal_draw(rng), 0.f, 1.f),
                      std::clamp(bg.b + sigma * normal_draw(rng), 0.f, 1.f)};
            }
            if (mask.at(y, x) != 0.f) px = fg;
            im.at(0, y, x) = px.r;
            im.at(1, y, x) = px.g;
            im.at(2, y, x) = px.b;
        }

    Generated g;
    g.image = std::move(im);
    g.mask = img::MaskMap(std::move(mask), img::MaskRole::SegTarget);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04llu", static_cast<unsigned long long>(index));
    g.name = buf;
    g.family = family;
    return g;
}

void write_dataset(const SynthSpec& spec, const std::string& out_root) {
    spec.validate();
    fs::create_directories(fs::path(out_root) / "images");
    fs::create_directories(fs::path(out_root) / "masks");
    nlohmann::json manifest;
    manifest["seed"] = spec.seed;
    manifest["size"] = spec.size;
    manifest["count"] = spec.count;
    manifest["families"] = {{"discs", spec.discs}, {"heads", spec.heads}};
    nlohmann::json items = nlohmann::json::array();
    for (int i = 0; i < spec.count; ++i) {
        Generated g = make_sample(spec, static_cast<uint64_t>(i));
        img::save_image((fs::path(out_root) / "images" / (g.name + ".png")).string(), g.image);
        img::save_mask((fs::path(out_root) / "masks" / (g.name + ".png")).string(), g.mask.map);
        items.push_back({{"name", g.name}, {"family", g.family}});
    }
    manifest["items"] = items;
    std::ofstream mf(fs::path(out_root) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

data::Dataset make_dataset(const SynthSpec& spec, int canonical_width) {
    spec.validate();
    std::vector<data::Sample> samples;
    for (int i = 0; i < spec.count; ++i) {
        Generated g = make_sample(spec, static_cast<uint64_t>(i));
        data::Sample s;
        s.source_id = g.name;
        s.image = std::move(g.image);
        s.seg_target = std::move(g.mask);
        s.boundary_target = boundary::make_boundary_target(s.seg_target, canonical_width);
        samples.push_back(std::move(s));
    }
    return data::Dataset(std::move(samples), canonical_width);
}

} // namespace banet::synth
