#pragma once

#include "mgca/data.hpp"
#include "mgca/inference.hpp"
#include "mgca/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mgca {

/// Flat key=value settings with dotted namespaces ("loss.k_pix=0.06").
/// '#' starts a comment; later assignments override earlier ones.
class Config {
  public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::filesystem::path& path);

    /// Throws ConfigError for unknown keys or a malformed "key=value".
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& assignment);
    void merge(const Config& other);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    std::string to_text() const;

    static const std::vector<std::string>& known_keys();

  private:
    std::map<std::string, std::string> values_;
};

struct ModelConfig {
    int patch_size = 16;
    int channels = 32;
    std::uint64_t encoder_seed = 0;
    std::uint64_t decoder_seed = 1;
};

/// Every knob of a run, resolved from a Config with defaults filled in.
struct RunConfig {
    SyntheticConfig data;
    std::string data_path; // empty: generate in memory
    ModelConfig model;
    TrainConfig train;
    std::uint64_t train_seed = 0;
    int log_every = 50;
    int checkpoint_every = 0; // 0: final checkpoint only
    InferenceConfig inference; // defaults: short side 2 x data.image_size, window data.image_size, half-window stride
    bool background = false;
    double threshold = 0.5;

    static RunConfig from(const Config& cfg);
    /// Full echo with every resolved value, suitable for re-running.
    Config echo() const;
};

} // namespace mgca
