#include "banet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "banet/errors.hpp"

using nlohmann::json;

namespace banet::train {

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

json model_cfg_json(const nn::ModelConfig& m) {
    json stages = json::array();
    for (const nn::StageSpec& s : m.stages) stages.push_back({s.channels, s.blocks, s.mid});
    return {{"width", m.width},
            {"stem", m.stem_channels},
            {"stages", stages},
            {"mining", m.mining_channels},
            {"fusion", m.fusion_channels},
            {"reduce", m.reduce_channels},
            {"use_attention", m.use_attention},
            {"temperature", m.temperature}};
}

nn::ModelConfig model_cfg_from_json(const json& j) {
    nn::ModelConfig m;
    m.width = j.at("width");
    m.stem_channels = j.at("stem");
    for (const auto& s : j.at("stages"))
        m.stages.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()});
    m.mining_channels = j.at("mining");
    m.fusion_channels = j.at("fusion");
    m.reduce_channels = j.at("reduce");
    m.use_attention = j.at("use_attention");
    m.temperature = j.at("temperature");
    return m;
}

json train_cfg_json(const TrainConfig& c) {
    return {{"lr_max", c.lr_max},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"iterations", c.iterations},
            {"warmup_iterations", c.warmup_iterations},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"phase", phase_name(c.phase)},
            {"decay", decay_name(c.decay)},
            {"poly_power", c.poly_power},
            {"grad_clip", c.grad_clip},
            {"checkpoint_every", c.checkpoint_every},
            {"out_dir", c.out_dir}};
}

TrainConfig train_cfg_from_json(const json& j) {
    TrainConfig c;
    c.lr_max = j.at("lr_max");
    c.momentum = j.at("momentum");
    c.weight_decay = j.at("weight_decay");
    c.iterations = j.at("iterations");
    c.warmup_iterations = j.at("warmup_iterations");
    c.batch_size = j.at("batch_size");
    c.seed = j.at("seed");
    c.phase = phase_from_name(j.at("phase"));
    c.decay = decay_from_name(j.at("decay"));
    c.poly_power = j.at("poly_power");
    c.grad_clip = j.at("grad_clip");
    c.checkpoint_every = j.at("checkpoint_every");
    c.out_dir = j.at("out_dir");
    return c;
}

json weights_json(const loss::LossWeights& w) {
    return {{"alpha", w.alpha},       {"beta", w.beta},     {"gamma", w.gamma},
            {"gamma1", w.gamma1},     {"gamma2", w.gamma2}, {"lambda", w.lambda},
            {"temperature", w.temperature}};
}

loss::LossWeights weights_from_json(const json& j) {
    loss::LossWeights w;
    w.alpha = j.at("alpha");
    w.beta = j.at("beta");
    w.gamma = j.at("gamma");
    w.gamma1 = j.at("gamma1");
    w.gamma2 = j.at("gamma2");
    w.lambda = j.at("lambda");
    w.temperature = j.at("temperature");
    return w;
}

void append(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

} // namespace

void save_checkpoint(const std::string& path, nn::BanetModel& model, Sgd& opt,
                     const CheckpointMeta& meta) {
    json header;
    header["version"] = 1;
    header["iteration"] = meta.iteration;
    header["model"] = model_cfg_json(meta.model_cfg);
    header["trainer"] = train_cfg_json(meta.train_cfg);
    header["weights"] = weights_json(meta.weights);
    json psizes = json::array(), msizes = json::array(), bsizes = json::array();
    for (const nn::Parameter* p : model.params()) psizes.push_back(p->size());
    for (const auto& m : opt.momenta()) msizes.push_back(m.size());
    for (const nn::Buffer* b : model.buffers()) bsizes.push_back(b->v.size());
    header["param_sizes"] = psizes;
    header["momentum_sizes"] = msizes;
    header["buffer_sizes"] = bsizes;

    std::string hs = header.dump();
    std::string buf;
    buf.reserve(hs.size() + 64);
    append(buf, kCheckpointMagic, 8);
    uint32_t hlen = static_cast<uint32_t>(hs.size());
    append(buf, &hlen, 4);
    buf += hs;
    for (const nn::Parameter* p : model.params())
        append(buf, p->v.data(), p->v.size() * sizeof(float));
    for (const auto& m : opt.momenta()) append(buf, m.data(), m.size() * sizeof(float));
    for (const nn::Buffer* b : model.buffers())
        append(buf, b->v.data(), b->v.size() * sizeof(float));
    uint64_t h = fnv1a64(buf.data(), buf.size());
    append(buf, &h, 8);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("short write on checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 20 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
        throw DataError(path + ": not a checkpoint file");
    uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        throw DataError(path + ": checkpoint integrity hash mismatch");

    uint32_t hlen;
    std::memcpy(&hlen, buf.data() + 8, 4);
    if (12 + static_cast<size_t>(hlen) > buf.size() - 8)
        throw DataError(path + ": corrupt checkpoint header");
    json header = json::parse(buf.substr(12, hlen));
    if (header.at("version") != 1) throw DataError(path + ": unsupported checkpoint version");

    LoadedCheckpoint lc;
    lc.meta.iteration = header.at("iteration");
    lc.meta.model_cfg = model_cfg_from_json(header.at("model"));
    lc.meta.train_cfg = train_cfg_from_json(header.at("trainer"));
    lc.meta.weights = weights_from_json(header.at("weights"));

    lc.model = std::make_unique<nn::BanetModel>(lc.meta.model_cfg, lc.meta.train_cfg.seed);
    lc.opt = std::make_unique<Sgd>(lc.model->params(), lc.meta.train_cfg.momentum,
                                   lc.meta.train_cfg.weight_decay);

    size_t off = 12 + hlen;
    auto read_blob = [&](float* dst, size_t count, const char* what) {
        size_t bytes = count * sizeof(float);
        if (off + bytes > buf.size() - 8)
            throw DataError(path + ": checkpoint truncated in " + what);
        std::memcpy(dst, buf.data() + off, bytes);
        off += bytes;
    };
    const json& psizes = header.at("param_sizes");
    if (psizes.size() != lc.model->params().size())
        throw DataError(path + ": incompatible checkpoint (parameter table size)");
    for (size_t i = 0; i < psizes.size(); ++i) {
        nn::Parameter* p = lc.model->params()[i];
        if (psizes[i].get<size_t>() != p->size())
            throw DataError(path + ": incompatible checkpoint (param " + p->name + " size)");
        read_blob(p->v.data(), p->size(), "parameters");
    }
    const json& msizes = header.at("momentum_sizes");
    if (msizes.size() != lc.opt->momenta().size())
        throw DataError(path + ": incompatible checkpoint (momentum table size)");
    for (size_t i = 0; i < msizes.size(); ++i) {
        auto& m = lc.opt->momenta()[i];
        if (msizes[i].get<size_t>() != m.size())
            throw DataError(path + ": incompatible checkpoint (momentum size)");
        read_blob(m.data(), m.size(), "momenta");
    }
    const json& bsizes = header.at("buffer_sizes");
    if (bsizes.size() != lc.model->buffers().size())
        throw DataError(path + ": incompatible checkpoint (buffer table size)");
    for (size_t i = 0; i < bsizes.size(); ++i) {
        nn::Buffer* b = lc.model->buffers()[i];
        if (bsizes[i].get<size_t>() != b->v.size())
            throw DataError(path + ": incompatible checkpoint (buffer " + b->name + " size)");
        read_blob(b->v.data(), b->v.size(), "buffers");
    }
    if (off != buf.size() - 8) throw DataError(path + ": checkpoint has trailing bytes");
    return lc;
}

} // namespace banet::train
