#include "banet/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "banet/errors.hpp"

namespace banet::cfg {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config: " + key + ": expected a number, got '" + v + "'");
    }
}

long long to_ll(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config: " + key + ": expected an integer, got '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    long long d = to_ll(key, v);
    if (d < -2147483648LL || d > 2147483647LL)
        throw UsageError("config: " + key + ": out of range: " + v);
    return int(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s;
    for (char c : v) s += char(std::tolower((unsigned char)c));
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw UsageError("config: " + key + ": expected a boolean, got '" + v + "'");
}

std::string num(double d) {
    char buf[64];
    for (int prec : {6, 9, 12, 15, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, d);
        if (std::stod(buf) == d) break;
    }
    return buf;
}

std::string numf(float f) {
    char buf[64];
    for (int prec : {6, 9}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, f);
        if (std::stof(buf) == f) break;
    }
    return buf;
}

struct Field {
    const char* name; // "section.key"
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get; // null: alias, not dumped
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"data.root", [](RunConfig& c, const std::string& v) { c.data_root = v; },
         [](const RunConfig& c) { return c.data_root; }},
        {"data.layout", [](RunConfig& c, const std::string& v) { c.data_layout = v; },
         [](const RunConfig& c) { return c.data_layout; }},
        {"data.resolution",
         [](RunConfig& c, const std::string& v) { c.resolution = to_int("data.resolution", v); },
         [](const RunConfig& c) { return std::to_string(c.resolution); }},
        {"data.augment",
         [](RunConfig& c, const std::string& v) { c.augment.enabled = to_bool("data.augment", v); },
         [](const RunConfig& c) { return c.augment.enabled ? "true" : "false"; }},
        {"data.rotation_deg",
         [](RunConfig& c, const std::string& v) {
             c.augment.rotation_deg = float(to_double("data.rotation_deg", v));
         },
         [](const RunConfig& c) { return numf(c.augment.rotation_deg); }},
        {"data.flip_prob",
         [](RunConfig& c, const std::string& v) {
             c.augment.flip_prob = float(to_double("data.flip_prob", v));
         },
         [](const RunConfig& c) { return numf(c.augment.flip_prob); }},
        {"data.light_lo",
         [](RunConfig& c, const std::string& v) {
             c.augment.light_lo = float(to_double("data.light_lo", v));
         },
         [](const RunConfig& c) { return numf(c.augment.light_lo); }},
        {"data.light_hi",
         [](RunConfig& c, const std::string& v) {
             c.augment.light_hi = float(to_double("data.light_hi", v));
         },
         [](const RunConfig& c) { return numf(c.augment.light_hi); }},
        {"data.batch_size",
         [](RunConfig& c, const std::string& v) {
             c.trainer.batch_size = to_int("data.batch_size", v);
         },
         nullptr},

        {"model.preset", [](RunConfig& c, const std::string& v) { c.model_preset = v; },
         [](const RunConfig& c) { return c.model_preset; }},
        {"model.width",
         [](RunConfig& c, const std::string& v) { c.model_width = to_int("model.width", v); },
         [](const RunConfig& c) { return std::to_string(c.model_width); }},
        {"model.use_attention",
         [](RunConfig& c, const std::string& v) {
             c.use_attention = to_bool("model.use_attention", v);
         },
         [](const RunConfig& c) { return c.use_attention ? "true" : "false"; }},

        {"loss.alpha",
         [](RunConfig& c, const std::string& v) { c.loss.alpha = to_double("loss.alpha", v); },
         [](const RunConfig& c) { return num(c.loss.alpha); }},
        {"loss.beta",
         [](RunConfig& c, const std::string& v) { c.loss.beta = to_double("loss.beta", v); },
         [](const RunConfig& c) { return num(c.loss.beta); }},
        {"loss.gamma",
         [](RunConfig& c, const std::string& v) { c.loss.gamma = to_double("loss.gamma", v); },
         [](const RunConfig& c) { return num(c.loss.gamma); }},
        {"loss.gamma1",
         [](RunConfig& c, const std::string& v) { c.loss.gamma1 = to_double("loss.gamma1", v); },
         [](const RunConfig& c) { return num(c.loss.gamma1); }},
        {"loss.gamma2",
         [](RunConfig& c, const std::string& v) { c.loss.gamma2 = to_double("loss.gamma2", v); },
         [](const RunConfig& c) { return num(c.loss.gamma2); }},
        {"loss.lambda",
         [](RunConfig& c, const std::string& v) { c.loss.lambda = to_double("loss.lambda", v); },
         [](const RunConfig& c) { return num(c.loss.lambda); }},
        {"loss.temperature",
         [](RunConfig& c, const std::string& v) {
             c.loss.temperature = to_double("loss.temperature", v);
         },
         [](const RunConfig& c) { return num(c.loss.temperature); }},

        {"trainer.lr_max",
         [](RunConfig& c, const std::string& v) {
             c.trainer.lr_max = to_double("trainer.lr_max", v);
         },
         [](const RunConfig& c) { return num(c.trainer.lr_max); }},
        {"trainer.momentum",
         [](RunConfig& c, const std::string& v) {
             c.trainer.momentum = to_double("trainer.momentum", v);
         },
         [](const RunConfig& c) { return num(c.trainer.momentum); }},
        {"trainer.weight_decay",
         [](RunConfig& c, const std::string& v) {
             c.trainer.weight_decay = to_double("trainer.weight_decay", v);
         },
         [](const RunConfig& c) { return num(c.trainer.weight_decay); }},
        {"trainer.iterations",
         [](RunConfig& c, const std::string& v) {
             c.trainer.iterations = to_ll("trainer.iterations", v);
         },
         [](const RunConfig& c) { return std::to_string(c.trainer.iterations); }},
        {"trainer.warmup_iterations",
         [](RunConfig& c, const std::string& v) {
             c.trainer.warmup_iterations = to_ll("trainer.warmup_iterations", v);
         },
         [](const RunConfig& c) { return std::to_string(c.trainer.warmup_iterations); }},
        {"trainer.batch_size",
         [](RunConfig& c, const std::string& v) {
             c.trainer.batch_size = to_int("trainer.batch_size", v);
         },
         [](const RunConfig& c) { return std::to_string(c.trainer.batch_size); }},
        {"trainer.seed",
         [](RunConfig& c, const std::string& v) {
             c.trainer.seed = uint64_t(to_ll("trainer.seed", v));
         },
         [](const RunConfig& c) { return std::to_string(c.trainer.seed); }},
        {"trainer.phase",
         [](RunConfig& c, const std::string& v) { c.trainer.phase = train::phase_from_name(v); },
         [](const RunConfig& c) { return train::phase_name(c.trainer.phase); }},
        {"trainer.decay",
         [](RunConfig& c, const std::string& v) { c.trainer.decay = train::decay_from_name(v); },
         [](const RunConfig& c) { return train::decay_name(c.trainer.decay); }},
        {"trainer.poly_power",
         [](RunConfig& c, const std::string& v) {
             c.trainer.poly_power = to_double("trainer.poly_power", v);
         },
         [](const RunConfig& c) { return num(c.trainer.poly_power); }},
        {"trainer.grad_clip",
         [](RunConfig& c, const std::string& v) {
             c.trainer.grad_clip = to_double("trainer.grad_clip", v);
         },
         [](const RunConfig& c) { return num(c.trainer.grad_clip); }},
        {"trainer.checkpoint_every",
         [](RunConfig& c, const std::string& v) {
             c.trainer.checkpoint_every = to_ll("trainer.checkpoint_every", v);
         },
         [](const RunConfig& c) { return std::to_string(c.trainer.checkpoint_every); }},
        {"trainer.out_dir",
         [](RunConfig& c, const std::string& v) { c.trainer.out_dir = v; },
         [](const RunConfig& c) { return c.trainer.out_dir; }},

        {"boundary.canonical_width",
         [](RunConfig& c, const std::string& v) {
             c.canonical_width = to_int("boundary.canonical_width", v);
         },
         [](const RunConfig& c) { return std::to_string(c.canonical_width); }},
    };
    return f;
}

const Field* find_field(const std::string& path) {
    for (const auto& f : fields())
        if (path == f.name) return &f;
    return nullptr;
}

} // namespace

nn::ModelConfig RunConfig::model_config() const {
    int width;
    if (model_preset == "banet64")
        width = 64;
    else if (model_preset == "banet512")
        width = 512;
    else if (model_preset == "custom")
        width = model_width;
    else
        throw UsageError("config: model.preset must be banet64, banet512 or custom, got '" +
                         model_preset + "'");
    nn::ModelConfig mc = nn::ModelConfig::banet(width);
    mc.use_attention = use_attention;
    mc.temperature = float(loss.temperature);
    return mc;
}

data::Layout RunConfig::layout() const { return data::layout_from_name(data_layout); }

void RunConfig::validate() const {
    if (resolution <= 0 || resolution % 32 != 0)
        throw UsageError("config: data.resolution must be a positive multiple of 32");
    layout(); // throws with the offending name
    if (augment.rotation_deg < 0 || augment.rotation_deg > 180)
        throw UsageError("config: data.rotation_deg must be in [0, 180]");
    if (augment.flip_prob < 0 || augment.flip_prob > 1)
        throw UsageError("config: data.flip_prob must be in [0, 1]");
    if (augment.light_lo <= 0 || augment.light_hi < augment.light_lo)
        throw UsageError("config: data.light_lo/light_hi must satisfy 0 < lo <= hi");
    model_config(); // validates preset and width
    if (loss.alpha < 0 || loss.beta < 0 || loss.gamma < 0 || loss.gamma1 < 0 ||
        loss.gamma2 < 0)
        throw UsageError("config: loss weights must be non-negative");
    if (loss.lambda <= 0) throw UsageError("config: loss.lambda must be > 0");
    if (loss.temperature <= 0) throw UsageError("config: loss.temperature must be > 0");
    trainer.validate();
    if (canonical_width <= 0)
        throw UsageError("config: boundary.canonical_width must be > 0");
}

std::string RunConfig::to_string() const {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (!f.get) continue;
        std::string name = f.name;
        std::string sec = name.substr(0, name.find('.'));
        std::string key = name.substr(name.find('.') + 1);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key + " = " + f.get(*this) + "\n";
    }
    return out;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UsageError(where() + "malformed section header: " + line);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw UsageError(where() + "empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(where() + "expected key = value, got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw UsageError(where() + "empty key");
        if (section.empty())
            throw UsageError(where() + "key '" + key + "' outside any [section]");
        std::string path = section + "." + key;
        const Field* f = find_field(path);
        if (!f) throw UsageError(where() + "unknown config key " + path);
        f->set(c, val);
    }
    return c;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

void apply_override(RunConfig& c, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw UsageError("--set expects section.key=value, got: " + assignment);
    std::string path = trim(assignment.substr(0, eq));
    std::string val = trim(assignment.substr(eq + 1));
    const Field* f = find_field(path);
    if (!f) throw UsageError("--set: unknown config key " + path);
    f->set(c, val);
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig c = path.empty() ? RunConfig{} : parse_config_file(path);
    for (const auto& o : overrides) apply_override(c, o);
    c.validate();
    return c;
}

} // namespace banet::cfg
