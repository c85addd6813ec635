#include "mgca/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mgca {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

} // namespace

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys = {
        "data.path",          "data.seed",          "data.n_samples",     "data.image_size",
        "data.min_objects",   "data.max_objects",   "model.patch_size",   "model.channels",
        "model.encoder_seed", "model.decoder_seed", "loss.tau",           "loss.k",
        "loss.k_n",           "loss.k_pix",         "loss.f",             "loss.obj",
        "loss.reg",           "loss.pix",           "train.batch_size",   "train.lr",
        "train.steps",        "train.warmup_steps", "train.weight_decay", "train.seed",
        "train.log_every",    "train.checkpoint_every", "inference.short_side", "inference.window",
        "inference.stride",   "inference.meta_points", "inference.pixel_unit", "inference.logit_scale",
        "inference.background", "inference.threshold",
    };
    return keys;
}

void Config::set(const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

Config Config::parse(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            cfg.apply_override(line);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " expects a number, got '" + it->second + "'");
    }
}

long long Config::get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t used = 0;
        long long v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " expects an integer, got '" + it->second + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("config key " + key + " expects a boolean, got '" + v + "'");
}

std::string Config::to_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    return out.str();
}

RunConfig RunConfig::from(const Config& c) {
    RunConfig r;
    r.data_path = c.get_string("data.path", "");
    r.data.seed = std::uint64_t(c.get_int("data.seed", 0));
    r.data.n_samples = int(c.get_int("data.n_samples", 500));
    r.data.image_size = int(c.get_int("data.image_size", 64));
    r.data.min_objects = int(c.get_int("data.min_objects", 1));
    r.data.max_objects = int(c.get_int("data.max_objects", 3));

    r.model.patch_size = int(c.get_int("model.patch_size", 16));
    r.model.channels = int(c.get_int("model.channels", 32));
    r.model.encoder_seed = std::uint64_t(c.get_int("model.encoder_seed", 0));
    r.model.decoder_seed = std::uint64_t(c.get_int("model.decoder_seed", 1));
    r.data.patch_size = r.model.patch_size;
    if (r.model.patch_size <= 0 || r.model.channels <= 0) throw ConfigError("model dimensions must be positive");

    TrainConfig& t = r.train;
    t.tau = c.get_double("loss.tau", t.tau);
    t.k = c.get_double("loss.k", t.k);
    t.k_n = c.get_double("loss.k_n", t.k_n);
    t.k_pix = c.get_double("loss.k_pix", t.k_pix);
    t.f = c.get_double("loss.f", t.f);
    t.use_obj = c.get_bool("loss.obj", t.use_obj);
    t.use_reg = c.get_bool("loss.reg", t.use_reg);
    t.use_pix = c.get_bool("loss.pix", t.use_pix);
    t.batch_size = int(c.get_int("train.batch_size", t.batch_size));
    t.learning_rate = c.get_double("train.lr", t.learning_rate);
    t.steps = int(c.get_int("train.steps", t.steps));
    t.warmup_steps = int(c.get_int("train.warmup_steps", t.warmup_steps));
    t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
    t.validate();
    r.train_seed = std::uint64_t(c.get_int("train.seed", 0));
    r.log_every = int(c.get_int("train.log_every", 50));
    r.checkpoint_every = int(c.get_int("train.checkpoint_every", 0));

    InferenceConfig& inf = r.inference;
    inf.short_side = int(c.get_int("inference.short_side", 2 * r.data.image_size));
    inf.window = int(c.get_int("inference.window", r.data.image_size));
    inf.stride = int(c.get_int("inference.stride", std::max(1, r.data.image_size / 2)));
    inf.meta_points = int(c.get_int("inference.meta_points", 36));
    inf.pixel_unit = c.get_bool("inference.pixel_unit", false);
    inf.logit_scale = c.get_double("inference.logit_scale", 1.0 / t.tau);
    inf.validate();
    r.background = c.get_bool("inference.background", false);
    r.threshold = c.get_double("inference.threshold", 0.5);
    if (!(r.threshold >= 0.0 && r.threshold <= 1.0)) throw ConfigError("inference.threshold must lie in [0, 1]");
    return r;
}

Config RunConfig::echo() const {
    Config c;
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    if (!data_path.empty()) c.set("data.path", data_path);
    c.set("data.seed", std::to_string(data.seed));
    c.set("data.n_samples", std::to_string(data.n_samples));
    c.set("data.image_size", std::to_string(data.image_size));
    c.set("data.min_objects", std::to_string(data.min_objects));
    c.set("data.max_objects", std::to_string(data.max_objects));
    c.set("model.patch_size", std::to_string(model.patch_size));
    c.set("model.channels", std::to_string(model.channels));
    c.set("model.encoder_seed", std::to_string(model.encoder_seed));
    c.set("model.decoder_seed", std::to_string(model.decoder_seed));
    c.set("loss.tau", format_double(train.tau));
    c.set("loss.k", format_double(train.k));
    c.set("loss.k_n", format_double(train.k_n));
    c.set("loss.k_pix", format_double(train.k_pix));
    c.set("loss.f", format_double(train.f));
    c.set("loss.obj", b(train.use_obj));
    c.set("loss.reg", b(train.use_reg));
    c.set("loss.pix", b(train.use_pix));
    c.set("train.batch_size", std::to_string(train.batch_size));
    c.set("train.lr", format_double(train.learning_rate));
    c.set("train.steps", std::to_string(train.steps));
    c.set("train.warmup_steps", std::to_string(train.warmup_steps));
    c.set("train.weight_decay", format_double(train.weight_decay));
    c.set("train.seed", std::to_string(train_seed));
    c.set("train.log_every", std::to_string(log_every));
    c.set("train.checkpoint_every", std::to_string(checkpoint_every));
    c.set("inference.short_side", std::to_string(inference.short_side));
    c.set("inference.window", std::to_string(inference.window));
    c.set("inference.stride", std::to_string(inference.stride));
    c.set("inference.meta_points", std::to_string(inference.meta_points));
    c.set("inference.pixel_unit", b(inference.pixel_unit));
    c.set("inference.logit_scale", format_double(inference.logit_scale));
    c.set("inference.background", b(background));
    c.set("inference.threshold", format_double(threshold));
    return c;
}

} // namespace mgca
