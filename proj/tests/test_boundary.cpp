#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "banet/boundary.hpp"
#include "banet/errors.hpp"
#include "banet/rng.hpp"

using namespace banet;
using namespace banet::boundary;

namespace {

Planef random_mask(Pcg32& rng, int h, int w, float p = 0.5f) {
    Planef m(h, w);
    for (float& v : m.v) v = rng.next_float() < p ? 1.f : 0.f;
    return m;
}

// Chebyshev-ball check straight from the definition.
Planef brute_boundary(const Planef& seg, int k) {
    int r = k / 2;
    Planef edge(seg.h, seg.w);
    for (int y = 0; y < seg.h; ++y)
        for (int x = 0; x < seg.w; ++x) {
            float v = seg.at(y, x);
            bool e = false;
            if (y > 0 && seg.at(y - 1, x) != v) e = true;
            if (y + 1 < seg.h && seg.at(y + 1, x) != v) e = true;
            if (x > 0 && seg.at(y, x - 1) != v) e = true;
            if (x + 1 < seg.w && seg.at(y, x + 1) != v) e = true;
            edge.at(y, x) = e ? 1.f : 0.f;
        }
    Planef out(seg.h, seg.w);
    for (int y = 0; y < seg.h; ++y)
        for (int x = 0; x < seg.w; ++x) {
            float m = 0.f;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < seg.h && xx >= 0 && xx < seg.w)
                        m = std::max(m, edge.at(yy, xx));
                }
            out.at(y, x) = m;
        }
    return out;
}

} // namespace

TEST_CASE("adaptive kernel size") {
    auto k = [](long long fg, long long bg, int w = 50) {
        return dilation_kernel_size({fg, bg, w});
    };
    CHECK(k(30, 70) == 15);   // 0.30 * 50
    CHECK(k(0, 100) == 1);    // empty foreground still dilates by one pixel
    CHECK(k(50, 50) == 25);   // 0.5 * 50 -> 25, already odd
    CHECK(k(32, 68) == 17);   // 0.32 * 50 = 16 -> bumped odd
    CHECK(k(100, 0) == 51);   // full-frame portrait: 50 -> bumped odd
    CHECK(k(1, 999999) == 1); // rounds to 0 -> floor of 1

    // monotone in the canonical width for a fixed fraction
    int prev = 0;
    for (int w = 10; w <= 100; w += 10) {
        int cur = k(40, 60, w);
        CHECK(cur >= prev);
        CHECK(cur % 2 == 1);
        prev = cur;
    }
}

TEST_CASE("edge detection is class symmetric") {
    Pcg32 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Planef m = random_mask(rng, 17, 13);
        Planef inv(m.h, m.w);
        for (size_t i = 0; i < m.v.size(); ++i) inv.v[i] = 1.f - m.v[i];
        Planef e1 = detect_edges(m);
        Planef e2 = detect_edges(inv);
        CHECK(e1.v == e2.v);
    }
}

TEST_CASE("edges single interior pixel") {
    Planef m(7, 7);
    m.at(3, 3) = 1.f;
    Planef e = detect_edges(m);
    // the pixel itself and its 4-neighbours are edges, diagonals are not
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
            bool expect = std::abs(y - 3) + std::abs(x - 3) <= 1;
            CHECK(e.at(y, x) == (expect ? 1.f : 0.f));
        }
}

TEST_CASE("constant masks have no edges") {
    for (float fill : {0.f, 1.f}) {
        Planef m(9, 9, fill);
        Planef e = detect_edges(m);
        for (float v : e.v) CHECK(v == 0.f);
    }
}

TEST_CASE("square dilation equals the brute window max") {
    Pcg32 rng(32);
    for (int trial = 0; trial < 8; ++trial) {
        int h = 1 + int(rng.next_below(24));
        int w = 1 + int(rng.next_below(24));
        Planef m = random_mask(rng, h, w, 0.2f);
        for (int k : {1, 3, 5, 9}) {
            Planef got = dilate_square(m, k);
            int r = k / 2;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    float want = 0.f;
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            int yy = y + dy, xx = x + dx;
                            if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                                want = std::max(want, m.at(yy, xx));
                        }
                    REQUIRE(got.at(y, x) == want);
                }
        }
    }
}

TEST_CASE("dilating a single edge pixel gives a k x k block") {
    Planef m(9, 9);
    m.at(4, 4) = 1.f;
    Planef d = dilate_square(m, 3);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            CHECK(d.at(y, x) == ((std::abs(y - 4) <= 1 && std::abs(x - 4) <= 1) ? 1.f : 0.f));
}

TEST_CASE("boundary target matches the brute construction") {
    Pcg32 rng(33);
    for (int trial = 0; trial < 6; ++trial) {
        Planef m = random_mask(rng, 20, 20, 0.35f);
        img::MaskMap seg(m, img::MaskRole::SegTarget);
        img::MaskMap b = make_boundary_target(seg, 50);
        CHECK(b.role == img::MaskRole::BoundaryTarget);
        int k = dilation_kernel_size(spec_from_mask(m, 50));
        Planef want = brute_boundary(m, k);
        REQUIRE(b.map.v == want.v);
    }
}

TEST_CASE("edge pixels are inside their own boundary band") {
    Pcg32 rng(34);
    Planef m = random_mask(rng, 16, 16, 0.4f);
    img::MaskMap b = make_boundary_target({m, img::MaskRole::SegTarget}, 50);
    Planef e = detect_edges(m);
    for (size_t i = 0; i < e.v.size(); ++i)
        if (e.v[i] == 1.f) CHECK(b.map.v[i] == 1.f);
}

TEST_CASE("boundary band grows with canonical width") {
    Pcg32 rng(35);
    Planef m(32, 32);
    for (int y = 10; y < 22; ++y)
        for (int x = 10; x < 22; ++x) m.at(y, x) = 1.f;
    long long prev = -1;
    for (int w : {10, 30, 50, 90}) {
        img::MaskMap b = make_boundary_target({m, img::MaskRole::SegTarget}, w);
        long long area = 0;
        for (float v : b.map.v) area += v == 1.f;
        CHECK(area >= prev);
        prev = area;
    }
}

TEST_CASE("boundary target input validation") {
    Planef soft(4, 4, 0.5f);
    CHECK_THROWS_AS(make_boundary_target({soft, img::MaskRole::SegTarget}, 50), DataError);
    Planef ok(4, 4);
    ok.at(1, 1) = 1.f;
    CHECK_THROWS_AS(make_boundary_target({ok, img::MaskRole::Attention}, 50), UsageError);
    CHECK_THROWS_AS(dilation_kernel_size({0, 0, 50}), DataError);
    CHECK_THROWS_AS(dilate_square(ok, 4), UsageError); // even width has no center
    CHECK_THROWS_AS(dilate_square(ok, -1), UsageError);
}
