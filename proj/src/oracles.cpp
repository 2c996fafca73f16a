#include "banet/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>

#include "banet/boundary.hpp"
#include "banet/gradient.hpp"
#include "banet/image.hpp"
#include "banet/rng.hpp"

namespace banet::oracle {

namespace {

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

OracleResult ok(std::string name) { return {std::move(name), true, ""}; }
OracleResult fail(std::string name, std::string detail) {
    return {std::move(name), false, std::move(detail)};
}

Planed rand_plane(Pcg32& r, int h, int w, double lo, double hi) {
    Planed p(h, w);
    for (double& v : p.v) v = lo + (hi - lo) * r.next_double();
    return p;
}

Planed rand_binary(Pcg32& r, int h, int w, double p_one) {
    Planed p(h, w);
    for (double& v : p.v) v = r.next_double() < p_one ? 1.0 : 0.0;
    return p;
}

// Reference Sobel: explicit replicated border copy, then a direct window
// product with literal taps. Deliberately no code shared with the layer.
void brute_sobel(const Planed& m, Planed& gx, Planed& gy) {
    const int h = m.h, w = m.w;
    Planed pad(h + 2, w + 2);
    for (int y = 0; y < h + 2; ++y)
        for (int x = 0; x < w + 2; ++x)
            pad.at(y, x) = m.at(std::clamp(y - 1, 0, h - 1), std::clamp(x - 1, 0, w - 1));
    static const int tx[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
    static const int ty[3][3] = {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}};
    gx = Planed(h, w);
    gy = Planed(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double ax = 0, ay = 0;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double s = pad.at(y + ky, x + kx);
                    ax += tx[ky][kx] * s;
                    ay += ty[ky][kx] * s;
                }
            gx.at(y, x) = ax;
            gy.at(y, x) = ay;
        }
}

Planef brute_dilate(const Planef& in, int k) {
    const int r = k / 2;
    Planef out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float m = 0.f;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                    m = std::max(m, in.at(yy, xx));
                }
            out.at(y, x) = m;
        }
    return out;
}

int brute_kernel_width(double frac, int W) {
    long long k = std::llround(frac * W);
    if (k < 1) k = 1;
    if (k % 2 == 0) k += 1;
    return int(k);
}

// --- finite differences -----------------------------------------------------

constexpr double kFdStep = 1e-6;

bool grad_close(double a, double f) {
    return std::abs(a - f) <= 1e-8 + 1e-4 * std::max(std::abs(a), std::abs(f));
}

// Unique min and max with a working margin, and a non-degenerate range, so
// the normalization stays differentiable across the +-h probes.
bool minmax_margins_ok(const Planed& p, double margin) {
    double mn1 = std::numeric_limits<double>::infinity(), mn2 = mn1;
    double mx1 = -mn1, mx2 = -mn1;
    for (double v : p.v) {
        if (v < mn1) {
            mn2 = mn1;
            mn1 = v;
        } else if (v < mn2) {
            mn2 = v;
        }
        if (v > mx1) {
            mx2 = mx1;
            mx1 = v;
        } else if (v > mx2) {
            mx2 = v;
        }
    }
    return mn2 - mn1 > margin && mx1 - mx2 > margin && mx1 - mn1 > 1e-3;
}

bool refine_kinks_ok(const Planed& pred, const gcl::GradientField<double>& imf,
                     const Planed& mb, double lambda) {
    const double d = 1e-5;
    if (!minmax_margins_ok(pred, 1e-4)) return false;
    gcl::PredGradient<double> pg = gcl::prediction_gradient(pred);
    for (size_t i = 0; i < mb.v.size(); ++i) {
        if (mb.v[i] == 0.0) continue;
        double mp = pg.field.mag.v[i];
        if (mp < d) return false;
        double dot = imf.nux.v[i] * pg.field.nux.v[i] + imf.nuy.v[i] * pg.field.nuy.v[i];
        if (std::abs(dot) < d) return false;
        if (std::abs(lambda * imf.mag.v[i] - mp) < d) return false;
    }
    return true;
}

template <typename F>
bool fd_check(Planed& x, const Planed& analytic, F&& value, std::string& detail,
              const char* what) {
    for (size_t i = 0; i < x.v.size(); ++i) {
        double keep = x.v[i];
        x.v[i] = keep + kFdStep;
        double up = value();
        x.v[i] = keep - kFdStep;
        double dn = value();
        x.v[i] = keep;
        double fd = (up - dn) / (2 * kFdStep);
        if (!grad_close(analytic.v[i], fd)) {
            detail = fmt("%s px %zu analytic %.10g fd %.10g", what, i, analytic.v[i], fd);
            return false;
        }
    }
    return true;
}

} // namespace

OracleResult sobel_oracle(const SobelFn& candidate, std::uint64_t seed, int maps) {
    SobelFn fn = candidate;
    if (!fn)
        fn = [](const Planed& m, Planed& gx, Planed& gy) { gcl::sobel(m, gx, gy); };
    Pcg32 rng(seed);
    for (int t = 0; t < maps; ++t) {
        Planed m = rand_plane(rng, 8, 8, 0.0, 1.0);
        Planed gx, gy, bx, by;
        fn(m, gx, gy);
        brute_sobel(m, bx, by);
        for (int y = 1; y < m.h - 1; ++y)
            for (int x = 1; x < m.w - 1; ++x) {
                if (std::abs(gx.at(y, x) - bx.at(y, x)) > 1e-12 ||
                    std::abs(gy.at(y, x) - by.at(y, x)) > 1e-12)
                    return fail("sobel",
                                fmt("map %d (%d,%d): got (%.12g,%.12g) want (%.12g,%.12g)", t,
                                    y, x, gx.at(y, x), gy.at(y, x), bx.at(y, x), by.at(y, x)));
            }
    }
    Planed flat(8, 8, 0.37);
    Planed gx, gy;
    fn(flat, gx, gy);
    for (size_t i = 0; i < flat.v.size(); ++i)
        if (gx.v[i] != 0.0 || gy.v[i] != 0.0)
            return fail("sobel", fmt("constant map px %zu not exactly zero", i));
    return ok("sobel");
}

OracleResult dilation_oracle(const DilateFn& candidate, std::uint64_t seed, int cases) {
    DilateFn fn = candidate;
    if (!fn) fn = [](const Planef& in, int k) { return boundary::dilate_square(in, k); };
    Pcg32 rng(seed);
    for (int t = 0; t < cases; ++t) {
        int h = 1 + int(rng.next_below(32));
        int w = 1 + int(rng.next_below(32));
        int k = 1 + 2 * int(rng.next_below(6));
        Planef in(h, w);
        for (float& v : in.v) v = rng.next_below(4) == 0 ? 1.f : 0.f;
        Planef got = fn(in, k);
        Planef want = brute_dilate(in, k);
        for (size_t i = 0; i < want.v.size(); ++i)
            if (got.v[i] != want.v[i])
                return fail("dilation", fmt("case %d (%dx%d k=%d) px %zu got %g want %g", t, h,
                                            w, k, i, got.v[i], want.v[i]));
    }
    return ok("dilation");
}

OracleResult kernel_size_oracle(std::uint64_t seed, int cases) {
    Pcg32 rng(seed);
    const int W = 50;
    for (int t = 0; t < cases; ++t) {
        long long pa = 1 + (long long)rng.next_below(1000000);
        long long ba = 1 + (long long)rng.next_below(1000000);
        int got = boundary::dilation_kernel_size({pa, ba, W});
        int want = brute_kernel_width(double(pa) / double(pa + ba), W);
        if (got != want)
            return fail("kernel_size",
                        fmt("areas %lld/%lld: got %d want %d", pa, ba, got, want));
    }
    if (boundary::dilation_kernel_size({3, 7, W}) != 15)
        return fail("kernel_size", "0.3 * 50 must give 15");
    return ok("kernel_size");
}

OracleResult bilinear_oracle() {
    Planed in(2, 2);
    in.at(0, 0) = 0;
    in.at(0, 1) = 1;
    in.at(1, 0) = 0;
    in.at(1, 1) = 1;
    Planed up = img::resize_bilinear(in, 2, 4);
    const double want[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x)
            if (std::abs(up.at(y, x) - want[x]) > 1e-12)
                return fail("bilinear",
                            fmt("(%d,%d) got %.15g want %.15g", y, x, up.at(y, x), want[x]));
    Planed same = img::resize_bilinear(in, 2, 2);
    for (size_t i = 0; i < in.v.size(); ++i)
        if (same.v[i] != in.v[i]) return fail("bilinear", "identity resize not bitwise");
    return ok("bilinear");
}

OracleResult loss_golden_oracle(const loss::LossWeights& w) {
    Planed half(2, 2, 0.5), one(2, 2, 1.0);
    double b = loss::bce(half, one);
    if (std::abs(b - std::log(2.0)) > 1e-9)
        return fail("loss_goldens", fmt("bce(1, 0.5) = %.12g, want ln 2", b));

    // Two boundary pixels. First: orthogonal directions, image magnitude 2
    // against prediction magnitude 1, so the margin term is 1.5*2 - 1 = 2 and
    // the direction term is 1. Second: aligned directions with a weak image
    // edge, hinge inactive. Means: cos 0.5, mag 1.0, refine 0.75.
    gcl::GradientField<double> fi, fp;
    fi.mag = Planed(1, 2);
    fi.nux = Planed(1, 2);
    fi.nuy = Planed(1, 2);
    fp = fi;
    fi.mag.at(0, 0) = 2.0;
    fi.nux.at(0, 0) = 1.0;
    fi.nuy.at(0, 0) = 0.0;
    fp.mag.at(0, 0) = 1.0;
    fp.nux.at(0, 0) = 0.0;
    fp.nuy.at(0, 0) = 1.0;
    fi.mag.at(0, 1) = 0.2;
    fi.nux.at(0, 1) = 0.6;
    fi.nuy.at(0, 1) = 0.8;
    fp.mag.at(0, 1) = 1.0;
    fp.nux.at(0, 1) = 0.6;
    fp.nuy.at(0, 1) = 0.8;
    Planed mb(1, 2, 1.0);
    loss::RefineTerms<double> rt = loss::refine_terms(fi, fp, mb, w.lambda);
    if (std::abs(rt.cos_mean() - 0.5) > 1e-12)
        return fail("loss_goldens", fmt("cos mean %.12g, want 0.5", rt.cos_mean()));
    if (std::abs(rt.mag_mean() - 1.0) > 1e-12)
        return fail("loss_goldens", fmt("mag mean %.12g, want 1.0 (hinge fixture)",
                                        rt.mag_mean()));
    double rf = loss::refine_loss(fi, fp, mb, w);
    if (std::abs(rf - 0.75) > 1e-12)
        return fail("loss_goldens", fmt("refine %.12g, want 0.75 (hinge fixture)", rf));

    Pcg32 rng(0x901d);
    Planed ps = rand_plane(rng, 6, 6, 0.05, 0.95);
    Planed ts = rand_binary(rng, 6, 6, 0.5);
    Planed pb = rand_plane(rng, 6, 6, 0.05, 0.95);
    Planed tb = rand_binary(rng, 6, 6, 0.4);
    tb.at(3, 3) = 1.0;
    Planed luma = rand_plane(rng, 6, 6, 0.0, 1.0);
    gcl::GradientField<double> imf = gcl::gradient_field(img::minmax_normalize(luma));
    gcl::PredGradient<double> pg = gcl::prediction_gradient(ps);
    loss::SampleLossInput<double> in;
    in.pred_seg = &ps;
    in.seg_target = &ts;
    in.pred_bound = &pb;
    in.bound_target = &tb;
    in.img_field = &imf;
    in.pred_grad = &pg;
    in.m_bound = &tb;
    loss::LossReport r = loss::total_loss(in, w, true);
    double want = w.alpha * r.seg + w.beta * r.bound + w.gamma * r.refine;
    if (std::abs(r.total - want) > 1e-6)
        return fail("loss_goldens", fmt("composition %.12g vs %.12g", r.total, want));
    if (std::abs(r.refine - (w.gamma1 * r.cos + w.gamma2 * r.mag)) > 1e-12)
        return fail("loss_goldens", "refine != gamma1*cos + gamma2*mag");
    return ok("loss_goldens");
}

OracleResult fd_loss_oracle(std::uint64_t seed, int trials) {
    Pcg32 rng(seed);
    loss::LossWeights w;
    loss::LossWeights wc = w, wm = w;
    wc.gamma1 = 1;
    wc.gamma2 = 0;
    wm.gamma1 = 0;
    wm.gamma2 = 1;
    std::string detail;
    for (int t = 0; t < trials; ++t) {
        // bce
        Planed p = rand_plane(rng, 6, 6, 0.05, 0.95);
        Planed tg = rand_binary(rng, 6, 6, 0.5);
        Planed ana = loss::bce_backward(p, tg);
        if (!fd_check(p, ana, [&] { return loss::bce(p, tg); }, detail, "bce"))
            return fail("fd_loss", detail);

        // refine family: cos only, mag only, both
        Planed luma = rand_plane(rng, 6, 6, 0.0, 1.0);
        gcl::GradientField<double> imf = gcl::gradient_field(img::minmax_normalize(luma));
        Planed mb = rand_binary(rng, 6, 6, 0.5);
        mb.at(2, 2) = 1.0;
        Planed pr;
        int tries = 0;
        do {
            pr = rand_plane(rng, 6, 6, 0.02, 0.98);
        } while (!refine_kinks_ok(pr, imf, mb, w.lambda) && ++tries < 200);
        if (tries >= 200) return fail("fd_loss", "could not find kink-free refine input");
        for (const auto* wp : {&wc, &wm, &w}) {
            gcl::PredGradient<double> pg = gcl::prediction_gradient(pr);
            loss::RefineTerms<double> rt =
                loss::refine_terms(imf, pg.field, mb, wp->lambda);
            Planed rana = loss::refine_backward(pr, pg, imf, mb, *wp, rt.count);
            auto value = [&] {
                return loss::refine_loss(imf, gcl::prediction_gradient(pr).field, mb, *wp);
            };
            const char* what = wp == &wc ? "cos" : (wp == &wm ? "mag" : "refine");
            if (!fd_check(pr, rana, value, detail, what)) return fail("fd_loss", detail);
        }

        // composed loss wrt both heads; the seg prediction also feeds the
        // gradient chain, so the probe rebuilds it per evaluation
        Planed ts = rand_binary(rng, 6, 6, 0.5);
        Planed pb = rand_plane(rng, 6, 6, 0.05, 0.95);
        tries = 0;
        do {
            p = rand_plane(rng, 6, 6, 0.05, 0.95);
        } while (!refine_kinks_ok(p, imf, mb, w.lambda) && ++tries < 200);
        if (tries >= 200) return fail("fd_loss", "could not find kink-free total input");
        auto total = [&] {
            gcl::PredGradient<double> pg = gcl::prediction_gradient(p);
            loss::SampleLossInput<double> in;
            in.pred_seg = &p;
            in.seg_target = &ts;
            in.pred_bound = &pb;
            in.bound_target = &mb;
            in.img_field = &imf;
            in.pred_grad = &pg;
            in.m_bound = &mb;
            return loss::total_loss(in, w, true).total;
        };
        {
            gcl::PredGradient<double> pg = gcl::prediction_gradient(p);
            loss::SampleLossInput<double> in;
            in.pred_seg = &p;
            in.seg_target = &ts;
            in.pred_bound = &pb;
            in.bound_target = &mb;
            in.img_field = &imf;
            in.pred_grad = &pg;
            in.m_bound = &mb;
            Planed dps, dpb;
            loss::total_loss_backward(in, w, true, dps, dpb);
            if (!fd_check(p, dps, total, detail, "total/seg")) return fail("fd_loss", detail);
            if (!fd_check(pb, dpb, total, detail, "total/bound"))
                return fail("fd_loss", detail);
        }
    }
    return ok("fd_loss");
}

std::vector<OracleResult> oracle_suite() {
    return {sobel_oracle(),      dilation_oracle(),    kernel_size_oracle(),
            bilinear_oracle(),   loss_golden_oracle(), fd_loss_oracle()};
}

bool all_pass(const std::vector<OracleResult>& rs) {
    for (const auto& r : rs)
        if (!r.pass) return false;
    return true;
}

std::string format_report(const std::vector<OracleResult>& rs) {
    std::string out;
    for (const auto& r : rs) {
        if (r.pass)
            out += "ok   " + r.name + "\n";
        else
            out += "FAIL " + r.name + ": " + r.detail + "\n";
    }
    return out;
}

} // namespace banet::oracle
