#include "banet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "banet/boundary.hpp"
#include "banet/checkpoint.hpp"
#include "banet/config.hpp"
#include "banet/errors.hpp"
#include "banet/evaluator.hpp"
#include "banet/gradient.hpp"
#include "banet/oracles.hpp"
#include "banet/synthetic.hpp"

namespace fs = std::filesystem;

namespace banet::cli {

namespace {

bool has_image_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return e == ".png" || e == ".jpg" || e == ".jpeg";
}

std::vector<fs::path> list_sorted(const std::string& dir, bool (*keep)(const fs::path&)) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && keep(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void field_mismatch(const char* key, const std::string& cur, const std::string& stored) {
    throw UsageError(std::string("config: trainer.") + key + " (" + cur +
                     ") is incompatible with the checkpoint (" + stored + ")");
}

void check_train_compat(const train::TrainConfig& cur, const train::TrainConfig& stored) {
    auto n = [](double d) {
        char b[32];
        std::snprintf(b, sizeof(b), "%g", d);
        return std::string(b);
    };
    if (cur.batch_size != stored.batch_size)
        field_mismatch("batch_size", std::to_string(cur.batch_size),
                       std::to_string(stored.batch_size));
    if (cur.seed != stored.seed)
        field_mismatch("seed", std::to_string(cur.seed), std::to_string(stored.seed));
    if (cur.lr_max != stored.lr_max) field_mismatch("lr_max", n(cur.lr_max), n(stored.lr_max));
    if (cur.momentum != stored.momentum)
        field_mismatch("momentum", n(cur.momentum), n(stored.momentum));
    if (cur.weight_decay != stored.weight_decay)
        field_mismatch("weight_decay", n(cur.weight_decay), n(stored.weight_decay));
    if (cur.iterations != stored.iterations)
        field_mismatch("iterations", std::to_string(cur.iterations),
                       std::to_string(stored.iterations));
    if (cur.resolved_warmup() != stored.resolved_warmup())
        field_mismatch("warmup_iterations", std::to_string(cur.resolved_warmup()),
                       std::to_string(stored.resolved_warmup()));
    if (cur.decay != stored.decay)
        field_mismatch("decay", train::decay_name(cur.decay), train::decay_name(stored.decay));
    if (cur.poly_power != stored.poly_power)
        field_mismatch("poly_power", n(cur.poly_power), n(stored.poly_power));
}

void check_model_compat(const nn::ModelConfig& cur, const nn::ModelConfig& stored) {
    auto bad = [](const char* what) {
        throw UsageError(std::string("config: model.") + what +
                         " does not match the checkpoint's model");
    };
    if (cur.width != stored.width) bad("width");
    if (cur.use_attention != stored.use_attention) bad("use_attention");
    if (cur.stem_channels != stored.stem_channels) bad("stem_channels");
    if (cur.mining_channels != stored.mining_channels ||
        cur.fusion_channels != stored.fusion_channels ||
        cur.reduce_channels != stored.reduce_channels)
        bad("channels");
    if (cur.stages.size() != stored.stages.size()) bad("stages");
    for (size_t i = 0; i < cur.stages.size(); ++i)
        if (cur.stages[i].channels != stored.stages[i].channels ||
            cur.stages[i].blocks != stored.stages[i].blocks ||
            cur.stages[i].mid != stored.stages[i].mid)
            bad("stages");
}

Tensor image_to_tensor(const img::Image& im) {
    Tensor t(1, 3, im.h, im.w);
    std::copy(im.data.begin(), im.data.end(), t.data());
    return t;
}

Planef confidence_plane(const nn::BanetModel& model, const Tensor& conf) {
    (void)model;
    Planef p(conf.h(), conf.w());
    std::copy(conf.plane(0, 0), conf.plane(0, 0) + conf.plane_size(), p.v.begin());
    return p;
}

// ---- make-targets ----------------------------------------------------------

struct MakeTargetsArgs {
    std::string mask_dir, out_dir;
    int width = 50;
};

int cmd_make_targets(const MakeTargetsArgs& a) {
    if (a.width <= 0) throw UsageError("--width must be > 0");
    if (!fs::is_directory(a.mask_dir))
        throw DataError("mask directory not found: " + a.mask_dir);
    auto masks = list_sorted(a.mask_dir, [](const fs::path& p) {
        return p.extension() == ".png" &&
               p.stem().string().find("_boundary") == std::string::npos;
    });
    if (masks.empty()) throw DataError("no .png masks found in " + a.mask_dir);
    fs::create_directories(a.out_dir);
    std::vector<std::string> failures;
    long long written = 0;
    double kernel_sum = 0;
    for (const auto& p : masks) {
        try {
            img::MaskMap m = img::load_mask(p.string(), img::MaskRole::SegTarget);
            kernel_sum += boundary::dilation_kernel_size(
                boundary::spec_from_mask(m.map, a.width));
            img::MaskMap b = boundary::make_boundary_target(m, a.width);
            fs::path out = fs::path(a.out_dir) / (p.stem().string() + "_boundary.png");
            img::save_mask(out.string(), b.map);
            ++written;
        } catch (const std::exception& e) {
            failures.push_back(p.string() + ": " + e.what());
        }
    }
    std::printf("wrote %lld boundary targets, mean kernel size %.2f\n", written,
                written ? kernel_sum / double(written) : 0.0);
    if (!failures.empty()) {
        for (const auto& f : failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
        return 2;
    }
    return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string phase;
    std::string resume, init;
    bool from_scratch = false;
    long long log_every = 10;
};

int cmd_train(const TrainArgs& a) {
    cfg::RunConfig rc = cfg::load_run_config(a.config_path, a.sets);
    if (!a.phase.empty()) rc.trainer.phase = train::phase_from_name(a.phase);
    if (rc.data_root.empty())
        throw UsageError("config: data.root is required (set it in the config file or via "
                         "--set data.root=PATH)");

    auto entries = data::scan_dataset(rc.data_root, rc.layout());
    data::Dataset ds(entries, rc.resolution, rc.canonical_width);

    std::unique_ptr<nn::BanetModel> model;
    std::unique_ptr<train::Sgd> opt;
    long long start_iter = 0;
    if (!a.resume.empty() && !a.init.empty())
        throw UsageError("--resume and --init are mutually exclusive");
    if (!a.resume.empty()) {
        train::LoadedCheckpoint lc = train::load_checkpoint(a.resume);
        if (lc.meta.train_cfg.phase != rc.trainer.phase)
            throw UsageError(std::string("checkpoint phase '") +
                             train::phase_name(lc.meta.train_cfg.phase) +
                             "' does not match requested phase '" +
                             train::phase_name(rc.trainer.phase) +
                             "'; use --init to start a new phase from these weights");
        check_train_compat(rc.trainer, lc.meta.train_cfg);
        check_model_compat(rc.model_config(), lc.meta.model_cfg);
        model = std::move(lc.model);
        opt = std::move(lc.opt);
        start_iter = lc.meta.iteration;
    } else if (!a.init.empty()) {
        // weights only; momentum restarts with the new phase
        train::LoadedCheckpoint lc = train::load_checkpoint(a.init);
        check_model_compat(rc.model_config(), lc.meta.model_cfg);
        model = std::move(lc.model);
        opt = std::make_unique<train::Sgd>(model->params(), rc.trainer.momentum,
                                           rc.trainer.weight_decay);
    } else {
        if (rc.trainer.phase == train::Phase::Finetune && !a.from_scratch)
            throw UsageError("finetune expects --init (pretrained checkpoint) or --resume; "
                             "pass --from-scratch to start anyway");
        model = std::make_unique<nn::BanetModel>(rc.model_config(), rc.trainer.seed);
        opt = std::make_unique<train::Sgd>(model->params(), rc.trainer.momentum,
                                           rc.trainer.weight_decay);
    }

    fs::create_directories(rc.trainer.out_dir);
    std::ofstream jsonl(fs::path(rc.trainer.out_dir) / "train_log.jsonl",
                        start_iter == 0 ? std::ios::trunc : std::ios::app);
    train::LogSink sink = [&](const train::IterationLog& l) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "{\"iteration\":%lld,\"lr\":%.8g,\"seg\":%.8g,\"bound\":%.8g,"
                      "\"cos\":%.8g,\"mag\":%.8g,\"refine\":%.8g,\"total\":%.8g}",
                      l.iteration, l.lr, l.report.seg, l.report.bound, l.report.cos,
                      l.report.mag, l.report.refine, l.report.total);
        jsonl << line << "\n";
        if (a.log_every > 0 &&
            (l.iteration % a.log_every == 0 || l.iteration + 1 == rc.trainer.iterations))
            std::printf("iter %lld lr %.5f total %.5f seg %.5f bound %.5f refine %.5f\n",
                        l.iteration, l.lr, l.report.total, l.report.seg, l.report.bound,
                        l.report.refine);
    };
    train::TrainResult res = train::train_phase(*model, *opt, ds, rc.trainer, rc.loss,
                                                rc.augment, start_iter, sink);
    std::printf("%s\n", res.last_checkpoint.c_str());
    return 0;
}

// ---- infer -----------------------------------------------------------------

struct InferArgs {
    std::string ckpt, input, out_dir = ".";
    bool soft = false;
    float threshold = 0.5f;
};

int cmd_infer(const InferArgs& a) {
    train::LoadedCheckpoint lc = train::load_checkpoint(a.ckpt);
    nn::BanetModel& model = *lc.model;

    std::vector<fs::path> inputs;
    if (fs::is_directory(a.input))
        inputs = list_sorted(a.input, [](const fs::path& p) { return has_image_ext(p); });
    else if (fs::exists(a.input))
        inputs.push_back(a.input);
    if (inputs.empty()) throw DataError("no input images at " + a.input);
    fs::create_directories(a.out_dir);

    int done = 0, failed = 0;
    for (const auto& p : inputs) {
        img::Image im;
        try {
            im = img::load_image(p.string());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "skipping %s: %s\n", p.string().c_str(), e.what());
            ++failed;
            continue;
        }
        data::PadRecord rec;
        img::Image padded = data::pad_image_to_multiple(im, 32, rec);
        Tensor in = image_to_tensor(padded);
        nn::ForwardOutput out = model.forward(in, false);
        Planef conf = confidence_plane(model, *out.confidence);
        Planef full = data::crop_back(conf, rec);
        std::string suffix = a.soft ? "_soft.png" : "_mask.png";
        if (!a.soft)
            for (float& v : full.v) v = v > a.threshold ? 1.f : 0.f;
        fs::path outp = fs::path(a.out_dir) / (p.stem().string() + suffix);
        img::save_mask(outp.string(), full);
        ++done;
    }
    std::printf("wrote %d mask(s) to %s\n", done, a.out_dir.c_str());
    return done > 0 ? 0 : 2;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, root;
    std::string layout = "folder_pairs";
    int resolution = 0; // 0: checkpoint's training resolution is unknown; default 512
    float threshold = 0.5f;
    bool two_class = false;
    bool no_fps = false;
    bool ablation = false;
    long long ablation_iters = 60;
    long long ablation_refine_iters = 20;
    int ablation_width = 64;
    std::string csv_path;
};

int cmd_eval(const EvalArgs& a) {
    auto entries = data::scan_dataset(a.root, data::layout_from_name(a.layout));
    eval::EvalConfig ec;
    ec.threshold = a.threshold;
    ec.two_class = a.two_class;
    ec.measure_fps = !a.no_fps;

    if (a.ablation) {
        int res = a.resolution > 0 ? a.resolution : 64;
        data::Dataset ds(entries, res, 50);
        eval::AblationConfig ac;
        ac.width = a.ablation_width;
        ac.iterations = a.ablation_iters;
        ac.refine_iterations = a.ablation_refine_iters;
        std::vector<eval::AblationRow> rows =
            eval::ablation_run(ds, ds, ac, loss::LossWeights{}, ec);
        std::fputs(eval::ablation_markdown(rows).c_str(), stdout);
        if (!a.csv_path.empty()) {
            std::ofstream f(a.csv_path, std::ios::trunc);
            f << eval::ablation_csv(rows);
        }
        return 0;
    }

    if (a.ckpt.empty()) throw UsageError("eval requires a checkpoint (or --ablation)");
    train::LoadedCheckpoint lc = train::load_checkpoint(a.ckpt);
    int res = a.resolution > 0 ? a.resolution : 512;
    data::Dataset ds(entries, res, 50);
    eval::EvalReport r = eval::evaluate(*lc.model, ds, ec);
    std::printf("%s\n", eval::report_json(r).c_str());
    return 0;
}

// ---- gradients -------------------------------------------------------------

struct GradientsArgs {
    std::string image, out_dir = ".";
};

int cmd_gradients(const GradientsArgs& a) {
    img::Image im = img::load_image(a.image);
    gcl::GradientField<float> f = gcl::image_gradient<float>(im);
    fs::create_directories(a.out_dir);
    std::string stem = fs::path(a.image).stem().string();
    img::save_mask((fs::path(a.out_dir) / (stem + "_gmag.png")).string(),
                   img::minmax_normalize(f.mag));
    Planef dx(f.nux.h, f.nux.w), dy(f.nuy.h, f.nuy.w);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] = 0.5f * (f.nux.v[i] + 1.f);
    for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] = 0.5f * (f.nuy.v[i] + 1.f);
    img::save_mask((fs::path(a.out_dir) / (stem + "_gdirx.png")).string(), dx);
    img::save_mask((fs::path(a.out_dir) / (stem + "_gdiry.png")).string(), dy);
    std::printf("wrote gradient maps for %s to %s\n", stem.c_str(), a.out_dir.c_str());
    return 0;
}

// ---- synth (hidden) --------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    int count = 8;
    int size = 128;
    uint64_t seed = 7;
    std::string families = "disc,heads";
    bool oracles = false;
};

int cmd_synth(const SynthArgs& a) {
    if (a.oracles) {
        std::vector<oracle::OracleResult> rs = oracle::oracle_suite();
        std::fputs(oracle::format_report(rs).c_str(), stdout);
        if (!oracle::all_pass(rs)) throw NumericError("oracle suite failed");
        return 0;
    }
    if (a.out_dir.empty()) throw UsageError("synth requires an output directory");
    synth::SynthSpec spec;
    spec.count = a.count;
    spec.size = a.size;
    spec.seed = a.seed;
    spec.discs = a.families.find("disc") != std::string::npos;
    spec.heads = a.families.find("head") != std::string::npos;
    spec.validate();
    synth::write_dataset(spec, a.out_dir);
    std::printf("wrote %d synthetic pairs to %s\n", spec.count, a.out_dir.c_str());
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"boundary-aware portrait segmentation toolkit"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::vector<std::string> sets;
    bool print_config = false;
    app.add_option("--config", config_path, "configuration file (INI sections)");
    app.add_option("--set", sets, "override: section.key=value (repeatable)");
    app.add_flag("--print-config", print_config, "dump the resolved configuration and exit");

    MakeTargetsArgs mt;
    auto* c_mt = app.add_subcommand("make-targets", "derive boundary-band targets from masks");
    c_mt->fallthrough();
    c_mt->add_option("mask_dir", mt.mask_dir, "directory of binary mask PNGs")->required();
    c_mt->add_option("out_dir", mt.out_dir, "output directory")->required();
    c_mt->add_option("--width", mt.width, "canonical dilation width");

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "train a model");
    c_tr->fallthrough();
    c_tr->add_option("--phase", tr.phase, "pretrain or finetune");
    c_tr->add_option("--resume", tr.resume, "checkpoint to continue the same phase");
    c_tr->add_option("--init", tr.init, "checkpoint supplying initial weights only");
    c_tr->add_flag("--from-scratch", tr.from_scratch, "allow finetune without a checkpoint");
    c_tr->add_option("--log-every", tr.log_every, "stdout logging period");

    InferArgs in;
    auto* c_in = app.add_subcommand("infer", "run a checkpoint over images");
    c_in->fallthrough();
    c_in->add_option("ckpt", in.ckpt, "checkpoint file")->required();
    c_in->add_option("input", in.input, "image file or directory")->required();
    c_in->add_option("--out", in.out_dir, "output directory");
    c_in->add_flag("--soft", in.soft, "write the confidence map instead of a binary mask");
    c_in->add_option("--threshold", in.threshold, "binarization threshold");

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "evaluate a checkpoint or run the ablation");
    c_ev->fallthrough();
    c_ev->add_option("--ckpt", ev.ckpt, "checkpoint file");
    c_ev->add_option("root", ev.root, "dataset root")->required();
    c_ev->add_option("--layout", ev.layout, "folder_pairs or pfcn_like");
    c_ev->add_option("--resolution", ev.resolution, "evaluation resolution");
    c_ev->add_option("--threshold", ev.threshold, "binarization threshold");
    c_ev->add_flag("--two-class", ev.two_class, "average foreground and background IoU");
    c_ev->add_flag("--no-fps", ev.no_fps, "skip the timing pass");
    c_ev->add_flag("--ablation", ev.ablation, "train and score the three variants");
    c_ev->add_option("--ablation-iters", ev.ablation_iters, "ablation pretrain iterations");
    c_ev->add_option("--ablation-refine-iters", ev.ablation_refine_iters,
                     "ablation refine iterations");
    c_ev->add_option("--ablation-width", ev.ablation_width, "ablation model width");
    c_ev->add_option("--csv", ev.csv_path, "also write the ablation table as CSV");

    GradientsArgs gr;
    auto* c_gr = app.add_subcommand("gradients", "write gradient-field visualizations");
    c_gr->fallthrough();
    c_gr->add_option("image", gr.image, "input image")->required();
    c_gr->add_option("--out", gr.out_dir, "output directory");

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synth", "generate a synthetic dataset");
    c_sy->fallthrough();
    c_sy->group(""); // hidden
    c_sy->add_option("out_dir", sy.out_dir, "output dataset root");
    c_sy->add_option("--count", sy.count, "number of samples");
    c_sy->add_option("--size", sy.size, "square image size");
    c_sy->add_option("--seed", sy.seed, "generation seed");
    c_sy->add_option("--families", sy.families, "comma list: disc,heads");
    c_sy->add_flag("--oracles", sy.oracles, "run the verification oracles instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (print_config) {
            cfg::RunConfig rc = cfg::load_run_config(config_path, sets);
            std::fputs(rc.to_string().c_str(), stdout);
            return 0;
        }
        if (c_mt->parsed()) return cmd_make_targets(mt);
        if (c_tr->parsed()) {
            tr.config_path = config_path;
            tr.sets = sets;
            return cmd_train(tr);
        }
        if (c_in->parsed()) return cmd_infer(in);
        if (c_ev->parsed()) return cmd_eval(ev);
        if (c_gr->parsed()) return cmd_gradients(gr);
        if (c_sy->parsed()) return cmd_synth(sy);
        std::fputs(app.help().c_str(), stderr);
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("banet");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& s : full) argv.push_back(s.c_str());
    return run_cli(int(argv.size()), argv.data());
}

} // namespace banet::cli
