#pragma once

#include "banet/gradient.hpp"
#include "banet/tensor.hpp"

namespace banet::loss {

// Log clamp for BCE probabilities.
inline constexpr double kClampEps = 1e-7;

struct LossWeights {
    double alpha = 0.6;  // seg
    double beta = 0.3;   // bound
    double gamma = 0.1;  // refine
    double gamma1 = 0.5; // cos inside refine
    double gamma2 = 0.5; // mag inside refine
    double lambda = 1.5; // magnitude margin
    double temperature = 4.0;
};

// Diagnostics for one loss evaluation. cos/mag are the boundary-masked means
// so that refine == gamma1*cos + gamma2*mag and
// total == alpha*seg + beta*bound + gamma*refine hold exactly by construction.
struct LossReport {
    double seg = 0, bound = 0, cos = 0, mag = 0, refine = 0, total = 0;
};

LossReport operator+(const LossReport& a, const LossReport& b);
LossReport operator*(double s, const LossReport& r);

// 1 / (1 + exp(-x / temp))
template <typename T>
Plane<T> temperature_sigmoid(const Plane<T>& x, T temp);

template <typename T>
Plane<T> temperature_sigmoid_backward(const Plane<T>& y, const Plane<T>& dy, T temp);

// Pixel-mean binary cross-entropy; probabilities clamped to
// [kClampEps, 1 - kClampEps] before the logs.
template <typename T>
T bce(const Plane<T>& pred, const Plane<T>& target);

template <typename T>
Plane<T> bce_backward(const Plane<T>& pred, const Plane<T>& target);

// Per-pixel terms, unmasked. cos: (1 - |nu_i . nu_p|) * mag_p.
// mag: max(lambda * mag_i - mag_p, 0).
template <typename T>
Plane<T> cos_map(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f);

template <typename T>
Plane<T> mag_map(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f,
                 T lambda);

// Masked sums over the boundary region plus the pixel count, so callers can
// renormalize when pooling several samples into one mean.
template <typename T>
struct RefineTerms {
    T cos_sum = T(0);
    T mag_sum = T(0);
    long long count = 0;

    T cos_mean() const { return count ? cos_sum / T(count) : T(0); }
    T mag_mean() const { return count ? mag_sum / T(count) : T(0); }
};

template <typename T>
RefineTerms<T> refine_terms(const gcl::GradientField<T>& img_f,
                            const gcl::GradientField<T>& pred_f, const Plane<T>& m_bound,
                            T lambda);

// Mean over boundary pixels of gamma1*cos + gamma2*mag; 0 when the mask is empty.
template <typename T>
T refine_loss(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f,
              const Plane<T>& m_bound, const LossWeights& w);

// Gradient of (gamma1*cos_sum + gamma2*mag_sum) / norm with respect to the raw
// prediction map, chained back through normalization and the Sobel field.
// norm is the boundary pixel count of the mean being differentiated.
template <typename T>
Plane<T> refine_backward(const Plane<T>& pred, const gcl::PredGradient<T>& pg,
                         const gcl::GradientField<T>& img_f, const Plane<T>& m_bound,
                         const LossWeights& w, long long norm);

// One sample's worth of loss inputs. pred_bound may be null (model variant
// without the attention head); pred_grad/m_bound may be null when the refine
// term is disabled.
template <typename T>
struct SampleLossInput {
    const Plane<T>* pred_seg = nullptr;
    const Plane<T>* seg_target = nullptr;
    const Plane<T>* pred_bound = nullptr;
    const Plane<T>* bound_target = nullptr;
    const gcl::GradientField<T>* img_field = nullptr;
    const gcl::PredGradient<T>* pred_grad = nullptr;
    const Plane<T>* m_bound = nullptr;
};

template <typename T>
LossReport total_loss(const SampleLossInput<T>& in, const LossWeights& w, bool refine_on);

template <typename T>
void total_loss_backward(const SampleLossInput<T>& in, const LossWeights& w, bool refine_on,
                         Plane<T>& d_pred_seg, Plane<T>& d_pred_bound);

} // namespace banet::loss
