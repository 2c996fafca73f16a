#pragma once

#include <cstdint>
#include <string>

#include "banet/tensor.hpp"

namespace banet::img {

// Planar RGB, values in [0,1], channel-major storage (R plane, G plane, B plane).
struct Image {
    int h = 0, w = 0;
    std::vector<float> data;

    Image() = default;
    Image(int hh, int ww) : h(hh), w(ww), data(static_cast<size_t>(3) * hh * ww, 0.f) {}

    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    Planef channel(int c) const {
        Planef p(h, w);
        std::copy(data.begin() + static_cast<size_t>(c) * h * w,
                  data.begin() + static_cast<size_t>(c + 1) * h * w, p.v.begin());
        return p;
    }
};

enum class MaskRole { SegTarget, BoundaryTarget, Attention, Confidence };

// Single-channel map in [0,1] plus the role it plays, so soft maps and hard
// targets cannot be mixed up silently.
struct MaskMap {
    Planef map;
    MaskRole role = MaskRole::SegTarget;

    MaskMap() = default;
    MaskMap(Planef m, MaskRole r) : map(std::move(m)), role(r) {}
};

const char* mask_role_name(MaskRole r);

// Decodes PNG or JPEG (sniffed from magic bytes) into RGB in [0,1].
// Grayscale sources are replicated across channels, alpha is dropped;
// both emit a one-line warning on stderr.
Image load_image(const std::string& path);

// Single-channel PNG. Hard target roles binarize at >127, soft roles scale
// to [0,1]. Multi-channel mask files are a data error.
MaskMap load_mask(const std::string& path, MaskRole role);

// 8-bit grayscale PNG, values round(v*255) after clamping to [0,1].
void save_mask(const std::string& path, const Planef& m);

// 8-bit RGB PNG.
void save_image(const std::string& path, const Image& im);

// (v - min) / (max - min); a constant map yields all zeros.
template <typename T>
Plane<T> minmax_normalize(const Plane<T>& in);

// Corner-aligned bilinear resample. Identity dims return a bitwise copy;
// outputs are clamped to the hull of the four source corners.
template <typename T>
Plane<T> resize_bilinear(const Plane<T>& in, int oh, int ow);

Image resize_bilinear(const Image& in, int oh, int ow);

// Nearest-neighbour resample (hard masks keep {0,1} values).
template <typename T>
Plane<T> resize_nearest(const Plane<T>& in, int oh, int ow);

} // namespace banet::img
