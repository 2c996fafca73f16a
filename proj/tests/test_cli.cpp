#include <doctest.h>

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "banet/boundary.hpp"
#include "banet/cli.hpp"
#include "banet/image.hpp"
#include "test_util.hpp"

using namespace banet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

struct CliResult {
    int code;
    std::string out; // stdout and stderr, interleaved
};

// Runs the front end in-process with both output streams captured.
CliResult run(const std::vector<std::string>& args) {
    static fs::path dir = test_dir("cli_capture");
    static int n = 0;
    fs::path tmp = dir / ("out_" + std::to_string(n++) + ".txt");
    std::fflush(stdout);
    std::fflush(stderr);
    int so = dup(1), se = dup(2);
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    REQUIRE(fd >= 0);
    dup2(fd, 1);
    dup2(fd, 2);
    ::close(fd);
    int code = cli::run_cli(args);
    std::fflush(stdout);
    std::fflush(stderr);
    dup2(so, 1);
    dup2(se, 2);
    ::close(so);
    ::close(se);
    return {code, slurp(tmp)};
}

} // namespace

TEST_CASE("workflow from synthesis through training to evaluation") {
    fs::path base = test_dir("cli_flow");
    std::string root = (base / "data").string();

    auto s = run({"synth", root, "--count", "3", "--size", "64"});
    CHECK(s.code == 0);
    CHECK(s.out.find("wrote 3 synthetic pairs") != std::string::npos);
    REQUIRE(fs::exists(fs::path(root) / "images" / "0000.png"));
    REQUIRE(fs::exists(fs::path(root) / "masks" / "0002.png"));

    // boundary targets match the library computation
    std::string bt = (base / "bt").string();
    auto m = run({"make-targets", (fs::path(root) / "masks").string(), bt});
    CHECK(m.code == 0);
    for (const char* nm : {"0000", "0001", "0002"})
        CHECK(fs::exists(fs::path(bt) / (std::string(nm) + "_boundary.png")));
    img::MaskMap seg = img::load_mask((fs::path(root) / "masks" / "0000.png").string(),
                                      img::MaskRole::SegTarget);
    img::MaskMap want = boundary::make_boundary_target(seg, 50);
    img::MaskMap got = img::load_mask((fs::path(bt) / "0000_boundary.png").string(),
                                      img::MaskRole::BoundaryTarget);
    CHECK(got.map.v == want.map.v);

    // a directory of nothing but *_boundary files has no inputs left
    CHECK(run({"make-targets", bt, (base / "bt2").string()}).code == 2);

    std::string pre = (base / "run_pre").string();
    std::vector<std::string> train_args = {
        "train", "--set", "data.root=" + root, "--set", "data.resolution=64",
        "--set", "data.augment=false", "--set", "model.preset=custom",
        "--set", "model.width=16", "--set", "trainer.iterations=4",
        "--set", "trainer.warmup_iterations=1", "--set", "trainer.batch_size=2",
        "--set", "trainer.checkpoint_every=2", "--set", "trainer.out_dir=" + pre};
    auto t = run(train_args);
    CHECK(t.code == 0);
    std::string mid = pre + "/ckpt_pretrain_000002.ckpt";
    std::string fin = pre + "/ckpt_pretrain_000004.ckpt";
    REQUIRE(fs::exists(mid));
    REQUIRE(fs::exists(fin));
    CHECK(t.out.find(fin) != std::string::npos); // final checkpoint path is reported

    // one parsable log line per iteration
    {
        std::ifstream f(fs::path(pre) / "train_log.jsonl");
        std::string line;
        long long lines = 0;
        while (std::getline(f, line)) {
            nlohmann::json j = nlohmann::json::parse(line);
            CHECK(j["iteration"].get<long long>() == lines);
            CHECK(std::isfinite(j["total"].get<double>()));
            ++lines;
        }
        CHECK(lines == 4);
    }

    // resume continues the phase from the midpoint into a fresh directory
    std::string res_dir = (base / "run_res").string();
    std::vector<std::string> resume_args = train_args;
    resume_args.back() = "trainer.out_dir=" + res_dir;
    resume_args.push_back("--resume");
    resume_args.push_back(mid);
    auto r = run(resume_args);
    CHECK(r.code == 0);
    CHECK(fs::exists(fs::path(res_dir) / "ckpt_pretrain_000004.ckpt"));

    // finetune refuses to start cold
    std::vector<std::string> ft_cold = train_args;
    ft_cold.push_back("--phase");
    ft_cold.push_back("finetune");
    auto fc = run(ft_cold);
    CHECK(fc.code == 1);
    CHECK(fc.out.find("finetune expects --init") != std::string::npos);

    // resuming across phases is refused with a pointer to --init
    std::vector<std::string> ft_res = ft_cold;
    ft_res.push_back("--resume");
    ft_res.push_back(mid);
    auto fr = run(ft_res);
    CHECK(fr.code == 1);
    CHECK(fr.out.find("checkpoint phase 'pretrain' does not match requested phase "
                      "'finetune'") != std::string::npos);

    std::vector<std::string> both = ft_res;
    both.push_back("--init");
    both.push_back(mid);
    auto b = run(both);
    CHECK(b.code == 1);
    CHECK(b.out.find("mutually exclusive") != std::string::npos);

    // changed hyper-parameters invalidate a resume
    std::vector<std::string> bad = train_args;
    bad.push_back("--set");
    bad.push_back("trainer.lr_max=0.3");
    bad.push_back("--resume");
    bad.push_back(mid);
    auto ic = run(bad);
    CHECK(ic.code == 1);
    CHECK(ic.out.find("is incompatible with the checkpoint") != std::string::npos);

    // --init carries weights into the refine phase
    std::string ftd = (base / "run_ft").string();
    auto ft = run({"train", "--phase", "finetune", "--init", fin,
                   "--set", "data.root=" + root, "--set", "data.resolution=64",
                   "--set", "data.augment=false", "--set", "model.preset=custom",
                   "--set", "model.width=16", "--set", "trainer.iterations=2",
                   "--set", "trainer.warmup_iterations=1", "--set", "trainer.batch_size=2",
                   "--set", "trainer.checkpoint_every=0", "--set",
                   "trainer.out_dir=" + ftd});
    CHECK(ft.code == 0);
    std::string final_ft = (fs::path(ftd) / "ckpt_finetune_000002.ckpt").string();
    REQUIRE(fs::exists(final_ft));

    // infer writes one binary mask per image
    std::string pred = (base / "pred").string();
    auto inf = run({"infer", final_ft, root + "/images", "--out", pred});
    CHECK(inf.code == 0);
    CHECK(inf.out.find("wrote 3 mask(s)") != std::string::npos);
    img::MaskMap pm = img::load_mask((fs::path(pred) / "0001_mask.png").string(),
                                     img::MaskRole::Attention);
    for (float v : pm.map.v) CHECK((v == 0.f || v == 1.f));

    // non-multiple-of-32 input round-trips through padding, soft output stays soft
    img::Image odd(48, 48);
    for (size_t i = 0; i < odd.data.size(); ++i)
        odd.data[i] = float(i % 97) / 96.f;
    std::string odd_path = (base / "odd.png").string();
    img::save_image(odd_path, odd);
    auto soft = run({"infer", final_ft, odd_path, "--out", pred, "--soft"});
    CHECK(soft.code == 0);
    img::MaskMap sm = img::load_mask((fs::path(pred) / "odd_soft.png").string(),
                                     img::MaskRole::Attention);
    CHECK(sm.map.h == 48);
    CHECK(sm.map.w == 48);
    int nonbinary = 0;
    for (float v : sm.map.v) nonbinary += v != 0.f && v != 1.f;
    CHECK(nonbinary > 0);

    // eval emits machine-readable json
    auto ev = run({"eval", root, "--ckpt", final_ft, "--resolution", "64", "--no-fps"});
    CHECK(ev.code == 0);
    nlohmann::json j = nlohmann::json::parse(ev.out);
    CHECK(j["per_image_iou"].size() == 3);
    CHECK(j["fps"].get<double>() == 0.0);
    CHECK(j["miou"].get<double>() >= 0.0);
    CHECK(j["miou"].get<double>() <= 1.0);

    // the ablation prints the three-variant table and mirrors it as csv
    std::string csvp = (base / "ab.csv").string();
    auto ab = run({"eval", root, "--ablation", "--ablation-iters", "3",
                   "--ablation-refine-iters", "2", "--ablation-width", "16",
                   "--resolution", "32", "--no-fps", "--csv", csvp});
    CHECK(ab.code == 0);
    CHECK(ab.out.rfind("| variant | mIoU | params (MB) | final total loss |", 0) == 0);
    CHECK(ab.out.find("| base |") != std::string::npos);
    CHECK(ab.out.find("| +attention |") != std::string::npos);
    CHECK(ab.out.find("| +attention+refine |") != std::string::npos);
    std::string csv = slurp(csvp);
    CHECK(csv.rfind("variant,miou,param_mb,final_total_loss\n", 0) == 0);
    size_t csv_lines = 0;
    for (char ch : csv) csv_lines += ch == '\n';
    CHECK(csv_lines == 4);

    // gradient visualizations
    std::string gdir = (base / "grad").string();
    auto g = run({"gradients", (fs::path(root) / "images" / "0000.png").string(),
                  "--out", gdir});
    CHECK(g.code == 0);
    for (const char* sfx : {"_gmag.png", "_gdirx.png", "_gdiry.png"})
        CHECK(fs::exists(fs::path(gdir) / (std::string("0000") + sfx)));
}

TEST_CASE("bad invocations exit with a usage error") {
    CliResult none = run({});
    CHECK(none.code == 1);
    CHECK(none.out.find("Usage") != std::string::npos);

    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"--bogus"}).code == 1);
    CHECK(run({"--help"}).code == 0);

    CHECK(run({"synth"}).code == 1); // no output directory
    auto dir = test_dir("cli_usage");
    CHECK(run({"synth", (dir / "x").string(), "--families", "squares"}).code == 1);
    CHECK(run({"make-targets", "x", "y", "--width", "0"}).code == 1);

    CliResult noroot = run({"train", "--set", "trainer.iterations=1"});
    CHECK(noroot.code == 1);
    CHECK(noroot.out.find("data.root is required") != std::string::npos);
    CHECK(run({"train", "--set", "junk"}).code == 1);
}

TEST_CASE("print-config dumps the resolved settings") {
    CliResult r = run({"--print-config", "--set", "trainer.lr_max=0.33"});
    CHECK(r.code == 0);
    CHECK(r.out.find("lr_max = 0.33") != std::string::npos);
    CHECK(r.out.find("[boundary]") != std::string::npos);

    CHECK(run({"--print-config", "--set", "garbage"}).code == 1);
    CHECK(run({"--print-config", "--config", "does_not_exist.ini"}).code == 1);

    // file values show up, overrides win
    auto dir = test_dir("cli_pc");
    auto ini = dir / "run.ini";
    {
        std::ofstream f(ini);
        f << "[trainer]\nbatch_size = 5\nlr_max = 0.2\n";
    }
    CliResult fr = run({"--print-config", "--config", ini.string(), "--set",
                        "trainer.lr_max=0.7"});
    CHECK(fr.code == 0);
    CHECK(fr.out.find("batch_size = 5") != std::string::npos);
    CHECK(fr.out.find("lr_max = 0.7") != std::string::npos);
}

TEST_CASE("data failures map to exit code two") {
    auto dir = test_dir("cli_data");
    CHECK(run({"infer", (dir / "nope.ckpt").string(), dir.string()}).code == 2);
    CHECK(run({"eval", (dir / "nowhere").string(), "--ckpt", "x"}).code == 2);
    CHECK(run({"make-targets", (dir / "nowhere").string(), (dir / "o").string()}).code == 2);
    CHECK(run({"gradients", (dir / "nope.png").string()}).code == 2);
    CHECK(run({"train", "--set", "data.root=" + (dir / "nowhere").string()}).code == 2);

    // one rotten mask fails the run but the good ones are still written
    fs::create_directories(dir / "masks");
    Planef blob(16, 16);
    for (int y = 5; y < 11; ++y)
        for (int x = 5; x < 11; ++x) blob.at(y, x) = 1.f;
    img::save_mask((dir / "masks" / "ok.png").string(), blob);
    {
        std::ofstream f(dir / "masks" / "bad.png");
        f << "this is not a png";
    }
    CliResult mt = run({"make-targets", (dir / "masks").string(), (dir / "bt").string()});
    CHECK(mt.code == 2);
    CHECK(mt.out.find("wrote 1 boundary targets") != std::string::npos);
    CHECK(mt.out.find("failed:") != std::string::npos);
    CHECK(fs::exists(dir / "bt" / "ok_boundary.png"));
}

TEST_CASE("verification oracles run from the command line") {
    CliResult r = run({"synth", "--oracles"});
    CHECK(r.code == 0);
    CHECK(r.out.find("ok   sobel") != std::string::npos);
    CHECK(r.out.find("ok   fd_loss") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}
