#pragma once

#include "mgca/config.hpp"
#include "mgca/data.hpp"
#include "mgca/decoder.hpp"
#include "mgca/encoders.hpp"
#include "mgca/losses.hpp"
#include "mgca/metrics.hpp"
#include "mgca/optim.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace mgca {

/// Frozen toy encoders plus the trainable decoder.
struct Model {
    ModelConfig config;
    std::unique_ptr<FrozenImageEncoder> image_encoder;
    std::unique_ptr<FrozenTextEncoder> text_encoder;
    Decoder decoder;

    explicit Model(const ModelConfig& cfg);
};

struct StepLog {
    int step = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

/// Optimises only the decoder. Frozen features are encoded and upsampled once
/// per record; text embeddings are cached per distinct caption.
class Trainer {
  public:
    Trainer(const Dataset& data, Model& model, const TrainConfig& cfg, std::uint64_t seed,
            std::vector<std::string> templates = {});

    /// One optimisation step; throws NumericError on a non-finite loss or gradient.
    StepLog step();
    std::vector<StepLog> run(const std::function<void(const StepLog&)>& on_step = {});

    int steps_done() const { return step_; }
    /// Texts (original plus generated) available for record i.
    const std::vector<std::string>& captions_of(size_t i) const { return generated_[i]; }

  private:
    const Vec& text_embedding(const std::string& caption);
    std::vector<size_t> next_batch();

    Model& model_;
    TrainConfig cfg_;
    std::vector<Mat> features_; // upsampled frozen features, L x C per record
    std::vector<std::string> captions_;
    std::vector<std::vector<std::string>> generated_;
    std::map<std::string, Vec> text_cache_;
    int rows_ = 0;
    int cols_ = 0;
    std::mt19937_64 rng_;
    CaptionSampler sampler_;
    std::vector<size_t> order_;
    size_t cursor_ = 0;
    AdamW optimizer_;
    int step_ = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const RunConfig& run);

struct LoadedCheckpoint {
    RunConfig run;
    std::unique_ptr<Model> model;
};

/// Throws IoError when the file is missing or lacks decoder arrays.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

enum class BackgroundMode {
    Ignore,    // ground-truth background pixels are skipped; foreground classes only
    Threshold, // background predicted by thresholding and scored like any class
};

struct EvalResult {
    ConfusionAccumulator confusion;
    MiouReport report; // background excluded from the mean
    std::vector<LabelMap> predictions; // dataset label space (0 = background)
};

/// Segments every record with masks and accumulates the confusion matrix.
/// classes[0] of the dataset is the background; the rest form the vocabulary.
EvalResult evaluate(const Dataset& data, const Model& model, const InferenceConfig& cfg, BackgroundMode mode,
                    double threshold = 0.5, bool keep_predictions = false);

} // namespace mgca
