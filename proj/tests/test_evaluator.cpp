#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "banet/boundary.hpp"
#include "banet/errors.hpp"
#include "banet/evaluator.hpp"
#include "test_util.hpp"

using namespace banet;
using namespace banet::eval;

namespace {

Planef plane(int h, int w, std::initializer_list<float> vals) {
    Planef p(h, w);
    size_t i = 0;
    for (float v : vals) p.v[i++] = v;
    return p;
}

data::Sample synth_sample(Pcg32& rng, int size, const std::string& id) {
    data::Sample s;
    s.image = img::Image(size, size);
    int cy = size / 3 + int(rng.next_below(size / 3));
    int cx = size / 3 + int(rng.next_below(size / 3));
    int r = size / 5 + int(rng.next_below(size / 6));
    Planef m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool in = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
            if (in) m.at(y, x) = 1.f;
            float base = in ? 0.8f : 0.25f;
            for (int c = 0; c < 3; ++c)
                s.image.at(c, y, x) = std::clamp(base + 0.1f * rng.next_float(), 0.f, 1.f);
        }
    s.seg_target = img::MaskMap(m, img::MaskRole::SegTarget);
    s.boundary_target = boundary::make_boundary_target(s.seg_target, 50);
    s.source_id = id;
    return s;
}

data::Dataset tiny_dataset(uint64_t seed, int count, int size) {
    Pcg32 rng(seed);
    std::vector<data::Sample> samples;
    for (int i = 0; i < count; ++i)
        samples.push_back(synth_sample(rng, size, "e" + std::to_string(i)));
    return data::Dataset(std::move(samples), 50);
}

} // namespace

TEST_CASE("binary iou counts intersection over union") {
    Planef a = plane(1, 3, {1, 1, 0});
    Planef b = plane(1, 3, {0, 1, 1});
    CHECK(iou_binary(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(iou_binary(a, a) == 1.0);

    Planef c = plane(1, 3, {1, 0, 0});
    Planef d = plane(1, 3, {0, 0, 1});
    CHECK(iou_binary(c, d) == 0.0);

    // both masks empty: vacuous agreement
    Planef z1(2, 2), z2(2, 2);
    CHECK(iou_binary(z1, z2) == 1.0);

    // symmetry
    Pcg32 rng(51);
    Planef p(9, 7), q(9, 7);
    for (size_t i = 0; i < p.v.size(); ++i) {
        p.v[i] = rng.next_float() > 0.5f ? 1.f : 0.f;
        q.v[i] = rng.next_float() > 0.5f ? 1.f : 0.f;
    }
    CHECK(iou_binary(p, q) == iou_binary(q, p));

    Planef wrong(3, 1);
    CHECK_THROWS_AS(iou_binary(a, wrong), DataError);
}

TEST_CASE("threshold map is a strict cut") {
    Planef conf = plane(1, 4, {0.2f, 0.5f, 0.500001f, 0.9f});
    Planef bin = threshold_map(conf, 0.5f);
    CHECK(bin.v[0] == 0.f);
    CHECK(bin.v[1] == 0.f); // exactly at the threshold stays background
    CHECK(bin.v[2] == 1.f);
    CHECK(bin.v[3] == 1.f);

    Planef all = threshold_map(conf, 0.f);
    for (float v : all.v) CHECK(v == 1.f);
}

TEST_CASE("two-class iou averages foreground and background") {
    Planef conf = plane(1, 4, {0.9f, 0.2f, 0.7f, 0.1f});
    Planef tgt = plane(1, 4, {1, 0, 0, 0});
    // pred {1,0,1,0}: fg 1/2, bg 2/3
    CHECK(iou(conf, tgt, 0.5f, false) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(iou(conf, tgt, 0.5f, true) ==
          doctest::Approx(0.5 * (0.5 + 2.0 / 3.0)).epsilon(1e-12));

    // perfect prediction scores 1 in both modes
    Planef hit = plane(1, 4, {0.9f, 0.1f, 0.1f, 0.2f});
    CHECK(iou(hit, tgt, 0.5f, false) == 1.0);
    CHECK(iou(hit, tgt, 0.5f, true) == 1.0);

    // swapping the roles of the two classes leaves the two-class score alone
    Pcg32 rng(52);
    Planef c(8, 8), t(8, 8), cf(8, 8), tf(8, 8);
    for (size_t i = 0; i < c.v.size(); ++i) {
        float v = rng.next_float();
        if (std::fabs(v - 0.5f) < 0.01f) v += 0.05f; // keep clear of the cut
        c.v[i] = v;
        t.v[i] = rng.next_float() > 0.5f ? 1.f : 0.f;
        cf.v[i] = 1.f - v;
        tf.v[i] = 1.f - t.v[i];
    }
    CHECK(iou(c, t, 0.5f, true) == iou(cf, tf, 0.5f, true));
}

TEST_CASE("threshold sweep stays finite and bounded") {
    Pcg32 rng(53);
    Planef conf(16, 16), tgt(16, 16);
    for (size_t i = 0; i < conf.v.size(); ++i) {
        conf.v[i] = rng.next_float();
        tgt.v[i] = rng.next_float() > 0.6f ? 1.f : 0.f;
    }
    for (int k = 0; k <= 20; ++k) {
        float t = 0.05f * float(k);
        for (bool two : {false, true}) {
            double r = iou(conf, tgt, t, two);
            CHECK(std::isfinite(r));
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
}

TEST_CASE("evaluate reports per-image scores and parameter size") {
    data::Dataset ds = tiny_dataset(21, 3, 32);
    nn::ModelConfig mc = nn::ModelConfig::banet(16);
    nn::BanetModel model(mc, 3);
    EvalConfig cfg;
    cfg.measure_fps = false;

    EvalReport rep = evaluate(model, ds, cfg);
    CHECK(rep.per_image_iou.size() == ds.size());
    double sum = 0;
    for (double v : rep.per_image_iou) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
    }
    CHECK(rep.miou == doctest::Approx(sum / 3.0).epsilon(1e-12));
    CHECK(rep.param_count == model.param_count());
    CHECK(rep.param_mb == 4.0 * double(rep.param_count) / double(1 << 20));
    CHECK(rep.fps == 0.0);

    // eval-mode forwards are deterministic, so a second pass scores the same
    EvalReport again = evaluate(model, ds, cfg);
    CHECK(again.per_image_iou == rep.per_image_iou);
}

TEST_CASE("fps drops when images grow") {
    nn::ModelConfig mc = nn::ModelConfig::banet(16);
    nn::BanetModel model(mc, 4);
    EvalConfig cfg;
    cfg.fps_warmup = 1;

    data::Dataset small = tiny_dataset(22, 2, 64);
    data::Dataset large = tiny_dataset(23, 2, 128);
    EvalReport rs = evaluate(model, small, cfg);
    EvalReport rl = evaluate(model, large, cfg);
    CHECK(rs.fps > 0.0);
    CHECK(rl.fps > 0.0);
    CHECK(rs.fps > rl.fps);
}

TEST_CASE("ablation trains and scores all three variants") {
    data::Dataset train_ds = tiny_dataset(31, 4, 32);
    data::Dataset eval_ds = tiny_dataset(32, 2, 32);
    AblationConfig cfg;
    cfg.width = 16;
    cfg.iterations = 6;
    cfg.refine_iterations = 3;
    cfg.batch_size = 2;
    cfg.lr_max = 0.02;
    cfg.seed = 9;
    loss::LossWeights w;
    EvalConfig ecfg;
    ecfg.measure_fps = false;

    std::vector<AblationRow> rows = ablation_run(train_ds, eval_ds, cfg, w, ecfg);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].name == "base");
    CHECK(rows[1].name == "+attention");
    CHECK(rows[2].name == "+attention+refine");

    // the attention head adds parameters; the refine loss does not
    CHECK(rows[0].report.param_count < rows[1].report.param_count);
    CHECK(rows[1].report.param_count == rows[2].report.param_count);

    for (const AblationRow& r : rows) {
        CHECK(r.report.per_image_iou.size() == eval_ds.size());
        CHECK(std::isfinite(r.final_loss.total));
    }
    // base variant has no boundary head and never runs the refine term
    CHECK(rows[0].final_loss.bound == 0.0);
    CHECK(rows[0].final_loss.refine == 0.0);
    CHECK(rows[1].final_loss.bound > 0.0);
    CHECK(rows[1].final_loss.refine == 0.0);
    // the full variant ends inside the fine-tuning phase
    CHECK(rows[2].final_loss.refine > 0.0);

    std::string md = ablation_markdown(rows);
    CHECK(md.rfind("| variant | mIoU | params (MB) | final total loss |\n", 0) == 0);
    CHECK(md.find("| base |") != std::string::npos);
    CHECK(md.find("| +attention |") != std::string::npos);
    CHECK(md.find("| +attention+refine |") != std::string::npos);
    size_t md_lines = 0;
    for (char ch : md) md_lines += ch == '\n';
    CHECK(md_lines == 5); // header + rule + three rows

    std::string csv = ablation_csv(rows);
    CHECK(csv.rfind("variant,miou,param_mb,final_total_loss\n", 0) == 0);
    size_t csv_lines = 0;
    for (char ch : csv) csv_lines += ch == '\n';
    CHECK(csv_lines == 4);
    CHECK(csv.find("\nbase,") != std::string::npos);
}

TEST_CASE("report json carries every field") {
    EvalReport r;
    r.miou = 0.5;
    r.fps = 12.5;
    r.param_count = 1000;
    r.param_mb = 4.0 * 1000 / double(1 << 20);
    r.per_image_iou = {0.25, 0.75};

    nlohmann::json j = nlohmann::json::parse(report_json(r));
    CHECK(j["miou"].get<double>() == 0.5);
    CHECK(j["fps"].get<double>() == 12.5);
    CHECK(j["param_count"].get<size_t>() == 1000);
    CHECK(j["param_mb"].get<double>() == r.param_mb);
    CHECK(j["per_image_iou"].size() == 2);
    CHECK(j["per_image_iou"][1].get<double>() == 0.75);
}
