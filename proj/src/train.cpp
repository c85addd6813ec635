#include "mgca/train.hpp"

#include "mgca/archive.hpp"
#include "mgca/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgca {

Model::Model(const ModelConfig& cfg)
    : config(cfg), image_encoder(toy_image_encoder(cfg.encoder_seed, cfg.patch_size, cfg.channels)),
      text_encoder(toy_text_encoder(cfg.encoder_seed + 1, cfg.channels)), decoder(cfg.channels, cfg.decoder_seed) {}

Trainer::Trainer(const Dataset& data, Model& model, const TrainConfig& cfg, std::uint64_t seed,
                 std::vector<std::string> templates)
    : model_(model), cfg_(cfg), rng_(seed), sampler_(seed ^ 0x5bd1e995ull), optimizer_(model.decoder.parameters()) {
    cfg_.validate();
    if (data.records.empty()) throw DataError("training set is empty");
    if (templates.empty()) templates = default_prompt_templates();
    for (const auto& r : data.records) {
        if (r.caption.empty()) throw DataError("record " + r.id + " has no caption");
        FeatureGrid up = model.decoder.upsample(model.image_encoder->encode_image(r.image));
        if (features_.empty()) {
            rows_ = up.rows;
            cols_ = up.cols;
        } else if (up.rows != rows_ || up.cols != cols_) {
            throw DataError("training images must share one resolution");
        }
        features_.push_back(std::move(up.values));
        captions_.push_back(r.caption);
        generated_.push_back(augment_captions(r.caption, r.nouns, templates));
    }
    order_.resize(features_.size());
    std::iota(order_.begin(), order_.end(), size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
}

const Vec& Trainer::text_embedding(const std::string& caption) {
    auto it = text_cache_.find(caption);
    if (it == text_cache_.end()) it = text_cache_.emplace(caption, model_.text_encoder->encode_text(caption)).first;
    return it->second;
}

std::vector<size_t> Trainer::next_batch() {
    const size_t B = std::min(size_t(cfg_.batch_size), order_.size());
    if (cursor_ + B > order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    std::vector<size_t> batch(order_.begin() + std::ptrdiff_t(cursor_), order_.begin() + std::ptrdiff_t(cursor_ + B));
    cursor_ += B;
    return batch;
}

StepLog Trainer::step() {
    const std::vector<size_t> idx = next_batch();
    const int B = static_cast<int>(idx.size());
    const int L = rows_ * cols_;
    const int C = model_.decoder.channels();

    Mat stacked(Eigen::Index(B) * L, C);
    BatchEmbeddings batch;
    batch.T.resize(B, C);
    for (int b = 0; b < B; ++b) {
        stacked.middleRows(Eigen::Index(b) * L, L) = features_[idx[size_t(b)]];
        const std::string& caption = sampler_.pick(captions_[idx[size_t(b)]], generated_[idx[size_t(b)]]);
        batch.T.row(b) = text_embedding(caption).transpose();
    }

    Decoder::Trace trace;
    const Mat out = model_.decoder.forward_blocks(stacked, B, rows_, cols_, &trace);
    batch.V.reserve(size_t(B));
    for (int b = 0; b < B; ++b) batch.V.push_back(out.middleRows(Eigen::Index(b) * L, L));

    EmbeddingGrad grad;
    StepLog log;
    log.step = step_;
    log.lr = cosine_lr(cfg_.learning_rate, step_, cfg_.warmup_steps, cfg_.steps);
    log.loss = loss_total(batch, cfg_, &grad);

    Mat d_out(out.rows(), C);
    for (int b = 0; b < B; ++b) d_out.middleRows(Eigen::Index(b) * L, L) = grad.V[size_t(b)];
    std::vector<Mat> grads = model_.decoder.zero_gradients();
    model_.decoder.backward_blocks(trace, d_out, grads);
    for (size_t i = 0; i < grads.size(); ++i)
        if (!grads[i].allFinite())
            throw NumericError("non-finite gradient for " + model_.decoder.parameters()[i].name + " at step " +
                               std::to_string(step_));
    optimizer_.step(model_.decoder.parameters(), grads, log.lr, cfg_.weight_decay);
    ++step_;
    return log;
}

std::vector<StepLog> Trainer::run(const std::function<void(const StepLog&)>& on_step) {
    std::vector<StepLog> log;
    log.reserve(size_t(std::max(0, cfg_.steps - step_)));
    while (step_ < cfg_.steps) {
        log.push_back(step());
        if (on_step) on_step(log.back());
    }
    return log;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const RunConfig& run) {
    NamedArrayArchive ar;
    const Config echo = run.echo();
    for (const auto& [k, v] : echo.values()) ar.set_meta("config." + k, v);
    ar.set_meta("seed.encoder", std::to_string(model.config.encoder_seed));
    ar.set_meta("seed.decoder", std::to_string(model.config.decoder_seed));
    ar.set_meta("seed.train", std::to_string(run.train_seed));
    ar.set_meta("seed.data", std::to_string(run.data.seed));
    ar.set_meta("decoder.parameter_count", std::to_string(model.decoder.parameter_count()));
    for (const auto& p : model.decoder.parameters()) ar.add("decoder." + p.name, p.value);
    ar.save(path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    NamedArrayArchive ar = NamedArrayArchive::load(path);
    Config cfg;
    for (const auto& [k, v] : ar.meta)
        if (k.rfind("config.", 0) == 0) cfg.set(k.substr(7), v);
    LoadedCheckpoint out;
    out.run = RunConfig::from(cfg);
    out.model = std::make_unique<Model>(out.run.model);
    bool any = false;
    for (auto& p : out.model->decoder.parameters()) {
        Mat m = ar.matrix("decoder." + p.name);
        if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
            throw IoError("checkpoint: shape mismatch for " + p.name);
        p.value = std::move(m);
        any = true;
    }
    if (!any) throw IoError("checkpoint holds no decoder parameters: " + path.string());
    return out;
}

EvalResult evaluate(const Dataset& data, const Model& model, const InferenceConfig& cfg, BackgroundMode mode,
                    double threshold, bool keep_predictions) {
    if (data.classes.size() < 2) throw DataError("evaluation needs the background and at least one class");
    std::vector<std::string> names(data.classes.begin() + 1, data.classes.end());
    ClassVocabulary vocab = build_vocabulary(names, default_prompt_templates(), *model.text_encoder,
                                             mode == BackgroundMode::Threshold, threshold);
    const int K = static_cast<int>(data.classes.size());
    EvalResult result{ConfusionAccumulator(K, 255, 0), MiouReport{}, {}};
    for (const auto& r : data.records) {
        if (r.mask.data.empty()) continue;
        for (int v : r.mask.data)
            if (v != 255 && (v < 0 || v >= K))
                throw DataError("mask value " + std::to_string(v) + " in " + r.id + " exceeds the " +
                                std::to_string(K) + "-class vocabulary");
        SegmentationResult seg = segment_image(r.image, *model.image_encoder, model.decoder, vocab, cfg);
        LabelMap pred = seg.labels;
        for (int& v : pred.data) v = v >= vocab.size() ? 0 : v + 1;
        LabelMap truth = r.mask;
        if (mode == BackgroundMode::Ignore)
            for (int& v : truth.data)
                if (v == 0) v = 255;
        result.confusion.add(truth, pred);
        if (keep_predictions) result.predictions.push_back(std::move(pred));
    }
    result.report = miou(result.confusion, false);
    return result;
}

} // namespace mgca
