#include "banet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "banet/errors.hpp"

namespace banet::loss {

LossReport operator+(const LossReport& a, const LossReport& b) {
    return {a.seg + b.seg, a.bound + b.bound, a.cos + b.cos,
            a.mag + b.mag, a.refine + b.refine, a.total + b.total};
}

LossReport operator*(double s, const LossReport& r) {
    return {s * r.seg, s * r.bound, s * r.cos, s * r.mag, s * r.refine, s * r.total};
}

template <typename T>
Plane<T> temperature_sigmoid(const Plane<T>& x, T temp) {
    Plane<T> y(x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i)
        y.v[i] = T(1) / (T(1) + std::exp(-x.v[i] / temp));
    return y;
}

template <typename T>
Plane<T> temperature_sigmoid_backward(const Plane<T>& y, const Plane<T>& dy, T temp) {
    Plane<T> dx(y.h, y.w);
    for (size_t i = 0; i < y.v.size(); ++i)
        dx.v[i] = dy.v[i] * y.v[i] * (T(1) - y.v[i]) / temp;
    return dx;
}

template <typename T>
T bce(const Plane<T>& pred, const Plane<T>& target) {
    if (!pred.same_shape(target)) throw DataError("bce: shape mismatch");
    const T eps = T(kClampEps);
    T acc = T(0);
    for (size_t i = 0; i < pred.v.size(); ++i) {
        T p = std::clamp(pred.v[i], eps, T(1) - eps);
        T t = target.v[i];
        acc += -t * std::log(p) - (T(1) - t) * std::log(T(1) - p);
    }
    return acc / T(pred.v.size());
}

template <typename T>
Plane<T> bce_backward(const Plane<T>& pred, const Plane<T>& target) {
    const T eps = T(kClampEps);
    Plane<T> d(pred.h, pred.w);
    T inv_n = T(1) / T(pred.v.size());
    for (size_t i = 0; i < pred.v.size(); ++i) {
        T p = pred.v[i];
        if (p <= eps || p >= T(1) - eps) continue; // clamped: locally constant
        T t = target.v[i];
        d.v[i] = (-t / p + (T(1) - t) / (T(1) - p)) * inv_n;
    }
    return d;
}

template <typename T>
Plane<T> cos_map(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f) {
    Plane<T> out(img_f.mag.h, img_f.mag.w);
    for (size_t i = 0; i < out.v.size(); ++i) {
        T dot = img_f.nux.v[i] * pred_f.nux.v[i] + img_f.nuy.v[i] * pred_f.nuy.v[i];
        out.v[i] = (T(1) - std::abs(dot)) * pred_f.mag.v[i];
    }
    return out;
}

template <typename T>
Plane<T> mag_map(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f,
                 T lambda) {
    Plane<T> out(img_f.mag.h, img_f.mag.w);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = std::max(lambda * img_f.mag.v[i] - pred_f.mag.v[i], T(0));
    return out;
}

template <typename T>
RefineTerms<T> refine_terms(const gcl::GradientField<T>& img_f,
                            const gcl::GradientField<T>& pred_f, const Plane<T>& m_bound,
                            T lambda) {
    if (!img_f.mag.same_shape(pred_f.mag) || !img_f.mag.same_shape(m_bound))
        throw DataError("refine_terms: shape mismatch");
    RefineTerms<T> rt;
    for (size_t i = 0; i < m_bound.v.size(); ++i) {
        if (m_bound.v[i] == T(0)) continue;
        T dot = img_f.nux.v[i] * pred_f.nux.v[i] + img_f.nuy.v[i] * pred_f.nuy.v[i];
        rt.cos_sum += (T(1) - std::abs(dot)) * pred_f.mag.v[i];
        rt.mag_sum += std::max(lambda * img_f.mag.v[i] - pred_f.mag.v[i], T(0));
        rt.count += 1;
    }
    return rt;
}

template <typename T>
T refine_loss(const gcl::GradientField<T>& img_f, const gcl::GradientField<T>& pred_f,
              const Plane<T>& m_bound, const LossWeights& w) {
    RefineTerms<T> rt = refine_terms(img_f, pred_f, m_bound, T(w.lambda));
    return T(w.gamma1) * rt.cos_mean() + T(w.gamma2) * rt.mag_mean();
}

template <typename T>
Plane<T> refine_backward(const Plane<T>& pred, const gcl::PredGradient<T>& pg,
                         const gcl::GradientField<T>& img_f, const Plane<T>& m_bound,
                         const LossWeights& w, long long norm) {
    Plane<T> dmag(pred.h, pred.w), dnux(pred.h, pred.w), dnuy(pred.h, pred.w);
    if (norm <= 0) return Plane<T>(pred.h, pred.w);
    T inv = T(1) / T(norm);
    const T g1 = T(w.gamma1), g2 = T(w.gamma2), lambda = T(w.lambda);
    const gcl::GradientField<T>& pf = pg.field;
    for (size_t i = 0; i < m_bound.v.size(); ++i) {
        if (m_bound.v[i] == T(0)) continue;
        T dot = img_f.nux.v[i] * pf.nux.v[i] + img_f.nuy.v[i] * pf.nuy.v[i];
        T sgn = dot > T(0) ? T(1) : (dot < T(0) ? T(-1) : T(0));
        dmag.v[i] += g1 * (T(1) - std::abs(dot)) * inv;
        dnux.v[i] += g1 * (-sgn) * pf.mag.v[i] * img_f.nux.v[i] * inv;
        dnuy.v[i] += g1 * (-sgn) * pf.mag.v[i] * img_f.nuy.v[i] * inv;
        if (lambda * img_f.mag.v[i] - pf.mag.v[i] > T(0)) dmag.v[i] += -g2 * inv;
    }
    return gcl::prediction_gradient_backward(pred, pg, dmag, dnux, dnuy);
}

template <typename T>
LossReport total_loss(const SampleLossInput<T>& in, const LossWeights& w, bool refine_on) {
    LossReport r;
    r.seg = static_cast<double>(bce(*in.pred_seg, *in.seg_target));
    if (in.pred_bound && in.bound_target)
        r.bound = static_cast<double>(bce(*in.pred_bound, *in.bound_target));
    if (refine_on && in.pred_grad && in.m_bound) {
        RefineTerms<T> rt = refine_terms(*in.img_field, in.pred_grad->field, *in.m_bound,
                                         T(w.lambda));
        r.cos = static_cast<double>(rt.cos_mean());
        r.mag = static_cast<double>(rt.mag_mean());
        r.refine = w.gamma1 * r.cos + w.gamma2 * r.mag;
    }
    r.total = w.alpha * r.seg + w.beta * r.bound + w.gamma * r.refine;
    return r;
}

template <typename T>
void total_loss_backward(const SampleLossInput<T>& in, const LossWeights& w, bool refine_on,
                         Plane<T>& d_pred_seg, Plane<T>& d_pred_bound) {
    d_pred_seg = bce_backward(*in.pred_seg, *in.seg_target);
    for (T& v : d_pred_seg.v) v *= T(w.alpha);
    if (refine_on && in.pred_grad && in.m_bound) {
        RefineTerms<T> rt = refine_terms(*in.img_field, in.pred_grad->field, *in.m_bound,
                                         T(w.lambda));
        if (rt.count > 0) {
            Plane<T> dr = refine_backward(*in.pred_seg, *in.pred_grad, *in.img_field,
                                          *in.m_bound, w, rt.count);
            for (size_t i = 0; i < dr.v.size(); ++i)
                d_pred_seg.v[i] += T(w.gamma) * dr.v[i];
        }
    }
    if (in.pred_bound && in.bound_target) {
        d_pred_bound = bce_backward(*in.pred_bound, *in.bound_target);
        for (T& v : d_pred_bound.v) v *= T(w.beta);
    } else {
        d_pred_bound = Plane<T>();
    }
}

#define BANET_LOSS_INST(T)                                                                    \
    template Plane<T> temperature_sigmoid(const Plane<T>&, T);                               \
    template Plane<T> temperature_sigmoid_backward(const Plane<T>&, const Plane<T>&, T);     \
    template T bce(const Plane<T>&, const Plane<T>&);                                        \
    template Plane<T> bce_backward(const Plane<T>&, const Plane<T>&);                        \
    template Plane<T> cos_map(const gcl::GradientField<T>&, const gcl::GradientField<T>&);   \
    template Plane<T> mag_map(const gcl::GradientField<T>&, const gcl::GradientField<T>&, T);\
    template struct RefineTerms<T>;                                                          \
    template RefineTerms<T> refine_terms(const gcl::GradientField<T>&,                        \
                                         const gcl::GradientField<T>&, const Plane<T>&, T); \
    template T refine_loss(const gcl::GradientField<T>&, const gcl::GradientField<T>&,       \
                           const Plane<T>&, const LossWeights&);                             \
    template Plane<T> refine_backward(const Plane<T>&, const gcl::PredGradient<T>&,          \
                                      const gcl::GradientField<T>&, const Plane<T>&,         \
                                      const LossWeights&, long long);                        \
    template LossReport total_loss(const SampleLossInput<T>&, const LossWeights&, bool);     \
    template void total_loss_backward(const SampleLossInput<T>&, const LossWeights&, bool,   \
                                      Plane<T>&, Plane<T>&);

BANET_LOSS_INST(float)
BANET_LOSS_INST(double)
#undef BANET_LOSS_INST

} // namespace banet::loss
