#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "banet/kernels.hpp"
#include "banet/rng.hpp"

using namespace banet;

namespace {

std::vector<float> randv(Pcg32& r, size_t n, float lo = -1.f, float hi = 1.f) {
    std::vector<float> v(n);
    for (float& x : v) x = lo + (hi - lo) * r.next_float();
    return v;
}

// Direct quadruple loop, no layout tricks; the kernels must match this.
void naive_conv(const std::vector<float>& in, int cin, int ph, int pw,
                const std::vector<float>& w, int cout, int k, int stride,
                std::vector<float>& out, int oh, int ow) {
    out.assign(size_t(cout) * oh * ow, 0.f);
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            size_t ii = (size_t(ci) * ph + oy * stride + ky) * pw +
                                        ox * stride + kx;
                            size_t wi = ((size_t(co) * cin + ci) * k + ky) * k + kx;
                            acc += double(in[ii]) * double(w[wi]);
                        }
                out[(size_t(co) * oh + oy) * ow + ox] = float(acc);
            }
}

void naive_wgrad(const std::vector<float>& in, int cin, int ph, int pw,
                 const std::vector<float>& dout, int cout, int k, int stride, int oh, int ow,
                 std::vector<float>& dw) {
    dw.assign(size_t(cout) * cin * k * k, 0.f);
    for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double acc = 0;
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox)
                            acc += double(dout[(size_t(co) * oh + oy) * ow + ox]) *
                                   double(in[(size_t(ci) * ph + oy * stride + ky) * pw +
                                             ox * stride + kx]);
                    dw[((size_t(co) * cin + ci) * k + ky) * k + kx] += float(acc);
                }
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, float tol) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        float scale = std::max({1.f, std::fabs(a[i]), std::fabs(b[i])});
        REQUIRE(std::fabs(a[i] - b[i]) <= tol * scale);
    }
}

struct ConvCase {
    int cin, cout, k, stride, ph, pw;
};

} // namespace

TEST_CASE("conv kernels match a naive reference") {
    Pcg32 rng(11);
    const ConvCase cases[] = {
        {1, 1, 3, 1, 8, 8},  {3, 4, 3, 1, 10, 7}, {4, 8, 3, 2, 11, 9},
        {2, 5, 1, 1, 6, 13}, {3, 2, 1, 2, 9, 9},  {8, 16, 3, 2, 16, 16},
    };
    for (const KernelTable* kt : {&scalar_kernels(), avx2_kernels()}) {
        if (!kt) continue;
        for (const ConvCase& c : cases) {
            int oh = (c.ph - c.k) / c.stride + 1;
            int ow = (c.pw - c.k) / c.stride + 1;
            // +8 slack mirrors the layer allocation contract for SIMD loads
            std::vector<float> in = randv(rng, size_t(c.cin) * c.ph * c.pw + 8);
            std::vector<float> w = randv(rng, size_t(c.cout) * c.cin * c.k * c.k);
            std::vector<float> out(size_t(c.cout) * oh * ow, 0.f), ref;
            kt->conv2d(in.data(), c.cin, c.ph, c.pw, w.data(), c.cout, c.k, c.stride,
                       out.data(), oh, ow);
            naive_conv(in, c.cin, c.ph, c.pw, w, c.cout, c.k, c.stride, ref, oh, ow);
            check_close(out, ref, 1e-4f);

            std::vector<float> dout = randv(rng, size_t(c.cout) * oh * ow);
            std::vector<float> dw(w.size(), 0.f), dwref;
            kt->conv2d_wgrad(in.data(), c.cin, c.ph, c.pw, dout.data(), c.cout, c.k,
                             c.stride, oh, ow, dw.data());
            naive_wgrad(in, c.cin, c.ph, c.pw, dout, c.cout, c.k, c.stride, oh, ow, dwref);
            check_close(dw, dwref, 1e-4f);
        }
    }
}

TEST_CASE("wgrad accumulates into existing gradients") {
    Pcg32 rng(12);
    const KernelTable& kt = scalar_kernels();
    int cin = 2, cout = 3, k = 3, stride = 1, ph = 7, pw = 7;
    int oh = 5, ow = 5;
    std::vector<float> in = randv(rng, size_t(cin) * ph * pw);
    std::vector<float> dout = randv(rng, size_t(cout) * oh * ow);
    std::vector<float> once(size_t(cout) * cin * k * k, 0.f);
    kt.conv2d_wgrad(in.data(), cin, ph, pw, dout.data(), cout, k, stride, oh, ow, once.data());
    std::vector<float> twice(once.size(), 0.f);
    kt.conv2d_wgrad(in.data(), cin, ph, pw, dout.data(), cout, k, stride, oh, ow,
                    twice.data());
    kt.conv2d_wgrad(in.data(), cin, ph, pw, dout.data(), cout, k, stride, oh, ow,
                    twice.data());
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(2.f * once[i]).epsilon(1e-5));
}

TEST_CASE("scalar and AVX2 elementwise kernels agree") {
    const KernelTable* simd = avx2_kernels();
    if (!simd) return; // build or CPU without AVX2
    const KernelTable& sc = scalar_kernels();
    Pcg32 rng(13);
    for (size_t n : {1, 7, 8, 9, 64, 1000}) {
        std::vector<float> x = randv(rng, n), y = randv(rng, n);

        std::vector<float> a = x, b = x;
        sc.relu(a.data(), n);
        simd->relu(b.data(), n);
        CHECK(a == b);

        std::vector<float> da = y, db = y;
        sc.relu_bwd(a.data(), da.data(), n);
        simd->relu_bwd(a.data(), db.data(), n);
        CHECK(da == db);

        std::vector<float> oa(n), ob(n);
        sc.add(x.data(), y.data(), oa.data(), n);
        simd->add(x.data(), y.data(), ob.data(), n);
        CHECK(oa == ob);

        oa = y;
        ob = y;
        sc.axpy(0.37f, x.data(), oa.data(), n);
        simd->axpy(0.37f, x.data(), ob.data(), n);
        check_close(oa, ob, 1e-6f);

        sc.scale_shift(x.data(), 1.7f, -0.3f, oa.data(), n);
        simd->scale_shift(x.data(), 1.7f, -0.3f, ob.data(), n);
        check_close(oa, ob, 1e-6f);

        float d1 = sc.dot(x.data(), y.data(), n);
        float d2 = simd->dot(x.data(), y.data(), n);
        CHECK(d1 == doctest::Approx(d2).epsilon(1e-4));
        CHECK(sc.sum(x.data(), n) == doctest::Approx(simd->sum(x.data(), n)).epsilon(1e-4));

        std::vector<float> w1 = x, w2 = x, v1 = y, v2 = y, g = randv(rng, n);
        sc.sgd_step(w1.data(), v1.data(), g.data(), 0.1f, 0.9f, 1e-4f, n);
        simd->sgd_step(w2.data(), v2.data(), g.data(), 0.1f, 0.9f, 1e-4f, n);
        check_close(w1, w2, 1e-5f);
        check_close(v1, v2, 1e-5f);
    }
}

TEST_CASE("sgd_step arithmetic") {
    const KernelTable& kt = active_kernels();
    float w = 2.f, v = 0.5f, g = 0.25f;
    float lr = 0.1f, mom = 0.9f, wd = 0.01f;
    float vexp = mom * v + (g + wd * w); // 0.45 + 0.27 = 0.72... with wd*w = 0.02 -> 0.72
    float wexp = w - lr * vexp;
    kt.sgd_step(&w, &v, &g, lr, mom, wd, 1);
    CHECK(v == doctest::Approx(vexp).epsilon(1e-6));
    CHECK(w == doctest::Approx(wexp).epsilon(1e-6));

    // momentum 0, decay 0: plain gradient step
    float w2 = 1.f, v2 = 0.f, g2 = 0.5f;
    kt.sgd_step(&w2, &v2, &g2, 0.2f, 0.f, 0.f, 1);
    CHECK(v2 == doctest::Approx(0.5f));
    CHECK(w2 == doctest::Approx(1.f - 0.2f * 0.5f));
}

TEST_CASE("relu semantics") {
    const KernelTable& kt = active_kernels();
    std::vector<float> x = {-1.f, 0.f, 2.f, -0.5f, 3.f};
    kt.relu(x.data(), x.size());
    CHECK(x == std::vector<float>{0.f, 0.f, 2.f, 0.f, 3.f});
    std::vector<float> dy = {1.f, 1.f, 1.f, 1.f, 1.f};
    kt.relu_bwd(x.data(), dy.data(), x.size());
    CHECK(dy == std::vector<float>{0.f, 0.f, 1.f, 0.f, 1.f});
}

TEST_CASE("kernel table selection") {
    CHECK(std::string(scalar_kernels().name) == "scalar");
    const KernelTable& act = active_kernels();
    CHECK((std::string(act.name) == "scalar" || std::string(act.name) == "avx2"));
    if (avx2_kernels()) CHECK(std::string(avx2_kernels()->name) == "avx2");
}
