#pragma once

#include "banet/image.hpp"
#include "banet/tensor.hpp"

namespace banet::boundary {

// Pixel counts feeding the adaptive dilation width rule.
struct DilationSpec {
    long long portrait_area = 0;
    long long background_area = 0;
    int canonical_width = 50;
};

// k = round(portrait / (portrait + background) * canonical_width),
// then bumped to the nearest odd value >= 1.
int dilation_kernel_size(const DilationSpec& s);

// A pixel is an edge pixel iff any in-bounds 4-neighbour differs. Both sides
// of the contour qualify, so the rule is symmetric in foreground/background.
Planef detect_edges(const Planef& seg);

// Square (Chebyshev) dilation with side k (odd), radius k/2, via two
// separable max passes.
Planef dilate_square(const Planef& in, int k);

// detect_edges + dilate_square with the adaptive width computed from the
// mask's own foreground share. Input must be a hard {0,1} seg target.
img::MaskMap make_boundary_target(const img::MaskMap& seg, int canonical_width);

DilationSpec spec_from_mask(const Planef& seg, int canonical_width);

} // namespace banet::boundary
