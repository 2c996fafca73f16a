#include "banet/boundary.hpp"

#include <algorithm>
#include <cmath>

#include "banet/errors.hpp"

namespace banet::boundary {

namespace {

void require_binary(const Planef& m, const char* who) {
    for (float v : m.v)
        if (v != 0.f && v != 1.f)
            throw DataError(std::string(who) + ": mask is not binary");
}

} // namespace

int dilation_kernel_size(const DilationSpec& s) {
    long long total = s.portrait_area + s.background_area;
    if (total <= 0) throw DataError("dilation_kernel_size: empty mask");
    double frac = static_cast<double>(s.portrait_area) / static_cast<double>(total);
    long k = std::lround(frac * s.canonical_width);
    if (k < 1) k = 1;
    if (k % 2 == 0) k += 1; // adjust up to nearest odd
    return static_cast<int>(k);
}

Planef detect_edges(const Planef& seg) {
    require_binary(seg, "detect_edges");
    Planef out(seg.h, seg.w);
    for (int y = 0; y < seg.h; ++y)
        for (int x = 0; x < seg.w; ++x) {
            float v = seg.at(y, x);
            bool edge = (y > 0 && seg.at(y - 1, x) != v) ||
                        (y + 1 < seg.h && seg.at(y + 1, x) != v) ||
                        (x > 0 && seg.at(y, x - 1) != v) ||
                        (x + 1 < seg.w && seg.at(y, x + 1) != v);
            out.at(y, x) = edge ? 1.f : 0.f;
        }
    return out;
}

Planef dilate_square(const Planef& in, int k) {
    if (k < 1 || k % 2 == 0) throw UsageError("dilate_square: kernel side must be odd and >= 1");
    int r = k / 2;
    if (r == 0) return in;
    Planef tmp(in.h, in.w), out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float m = 0.f;
            int lo = std::max(0, x - r), hi = std::min(in.w - 1, x + r);
            for (int xx = lo; xx <= hi; ++xx) m = std::max(m, in.at(y, xx));
            tmp.at(y, x) = m;
        }
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float m = 0.f;
            int lo = std::max(0, y - r), hi = std::min(in.h - 1, y + r);
            for (int yy = lo; yy <= hi; ++yy) m = std::max(m, tmp.at(yy, x));
            out.at(y, x) = m;
        }
    return out;
}

DilationSpec spec_from_mask(const Planef& seg, int canonical_width) {
    DilationSpec s;
    s.canonical_width = canonical_width;
    for (float v : seg.v)
        (v != 0.f ? s.portrait_area : s.background_area) += 1;
    return s;
}

img::MaskMap make_boundary_target(const img::MaskMap& seg, int canonical_width) {
    if (seg.role != img::MaskRole::SegTarget)
        throw UsageError("make_boundary_target: input must be a seg_target");
    require_binary(seg.map, "make_boundary_target");
    DilationSpec s = spec_from_mask(seg.map, canonical_width);
    int k = dilation_kernel_size(s);
    Planef b = dilate_square(detect_edges(seg.map), k);
    return img::MaskMap(std::move(b), img::MaskRole::BoundaryTarget);
}

} // namespace banet::boundary
