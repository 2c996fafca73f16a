#pragma once

#include "banet/image.hpp"
#include "banet/tensor.hpp"

namespace banet::gcl {

// Direction smoothing term and the magnitude floor below which direction
// vectors are zeroed.
inline constexpr double kEps = 1e-8;

template <typename T>
struct GradientField {
    Plane<T> mag;      // sqrt(gx^2 + gy^2)
    Plane<T> nux, nuy; // g / (mag + eps), zero where mag <= eps
    Plane<T> gx, gy;   // raw responses, kept for the backward pass
};

// 3x3 Sobel applied as cross-correlation with edge replication.
//   Kx = [[+1,0,-1],[+2,0,-2],[+1,0,-1]]   Ky = [[+1,+2,+1],[0,0,0],[-1,-2,-1]]
template <typename T>
void sobel(const Plane<T>& in, Plane<T>& gx, Plane<T>& gy);

template <typename T>
GradientField<T> gradient_field(const Plane<T>& in);

// Adjoint of sobel (scatter-add with the same clamped indexing).
template <typename T>
Plane<T> sobel_backward(int h, int w, const Plane<T>& dgx, const Plane<T>& dgy);

// d(input) given upstream gradients on (mag, nux, nuy).
template <typename T>
Plane<T> gradient_field_backward(const GradientField<T>& f, const Plane<T>& dmag,
                                 const Plane<T>& dnux, const Plane<T>& dnuy);

// Backward of minmax_normalize: min and max positions (first occurrence)
// collect the shift/scale terms; constant input has zero gradient.
template <typename T>
Plane<T> minmax_backward(const Plane<T>& in, const Plane<T>& dout);

// Field of a map that first passes through min-max normalization. Keeps the
// normalized map so the backward pass can rebuild the chain.
template <typename T>
struct PredGradient {
    Plane<T> norm;
    GradientField<T> field;
};

template <typename T>
PredGradient<T> prediction_gradient(const Plane<T>& pred);

template <typename T>
Plane<T> prediction_gradient_backward(const Plane<T>& pred, const PredGradient<T>& pg,
                                      const Plane<T>& dmag, const Plane<T>& dnux,
                                      const Plane<T>& dnuy);

// Luma (channel mean) -> min-max normalize -> field.
template <typename T>
GradientField<T> image_gradient(const img::Image& im);

} // namespace banet::gcl
