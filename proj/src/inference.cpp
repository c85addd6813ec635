#include "mgca/inference.hpp"

#include "mgca/resize.hpp"

#include <algorithm>
#include <cmath>

namespace mgca {

namespace {

Mat row_normalized(const Mat& m) {
    Mat out = m;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double n = out.row(r).norm();
        if (n > 0.0) out.row(r) /= n;
    }
    return out;
}

std::vector<GridPoint> lattice(int grid_h, int grid_w, int rows, int cols) {
    std::vector<GridPoint> pts;
    pts.reserve(size_t(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        int r = std::clamp(static_cast<int>(std::floor((i + 0.5) * grid_h / rows)), 0, grid_h - 1);
        for (int j = 0; j < cols; ++j) {
            int c = std::clamp(static_cast<int>(std::floor((j + 0.5) * grid_w / cols)), 0, grid_w - 1);
            pts.push_back({r, c});
        }
    }
    return pts;
}

} // namespace

std::vector<std::string> default_prompt_templates() {
    return {"a photo of a {}.", "a photo of the {}.", "a rendering of a {}.", "a picture of a {}.",
            "an image of a {}."};
}

std::string fill_template(const std::string& tmpl, const std::string& name) {
    std::string out = tmpl;
    auto pos = out.find("{}");
    if (pos == std::string::npos) return out + " " + name;
    out.replace(pos, 2, name);
    return out;
}

ClassVocabulary build_vocabulary(const std::vector<std::string>& class_names,
                                 const std::vector<std::string>& templates, const FrozenTextEncoder& text_encoder,
                                 bool has_background, double background_threshold) {
    if (class_names.empty()) throw ConfigError("vocabulary: no classes");
    if (templates.empty()) throw ConfigError("vocabulary: no prompt templates");
    ClassVocabulary vocab;
    vocab.class_names = class_names;
    vocab.prompt_templates = templates;
    vocab.has_background = has_background;
    vocab.background_threshold = background_threshold;
    vocab.text_matrix = Mat::Zero(Eigen::Index(class_names.size()), text_encoder.embed_dim());
    for (size_t k = 0; k < class_names.size(); ++k) {
        Vec acc = Vec::Zero(text_encoder.embed_dim());
        for (const auto& t : templates) acc += text_encoder.encode_text(fill_template(t, class_names[k]));
        vocab.text_matrix.row(Eigen::Index(k)) = (acc / double(templates.size())).transpose();
    }
    return vocab;
}

std::vector<GridPoint> sample_meta_points(int grid_h, int grid_w, int count) {
    const int cells = grid_h * grid_w;
    if (grid_h <= 0 || grid_w <= 0) throw ShapeError("sample_meta_points: empty grid");
    if (count <= 0) throw ConfigError("sample_meta_points: count must be positive");
    if (count > cells)
        throw ConfigError("sample_meta_points: " + std::to_string(count) + " meta-points exceed " +
                          std::to_string(cells) + " pixels");
    if (count == cells) return lattice(grid_h, grid_w, grid_h, grid_w);
    const int m = static_cast<int>(std::lround(std::sqrt(double(count))));
    if (m * m == count && m <= grid_h && m <= grid_w) return lattice(grid_h, grid_w, m, m);
    int best_rows = 0;
    double best_gap = 0.0;
    const double aspect = double(grid_h) / grid_w;
    for (int rows = 1; rows <= count; ++rows) {
        if (count % rows) continue;
        int cols = count / rows;
        if (rows > grid_h || cols > grid_w) continue;
        double gap = std::abs(std::log(double(rows) / cols / aspect));
        if (best_rows == 0 || gap < best_gap) {
            best_rows = rows;
            best_gap = gap;
        }
    }
    if (best_rows == 0)
        throw ConfigError("sample_meta_points: no lattice of " + std::to_string(count) + " points fits the grid");
    return lattice(grid_h, grid_w, best_rows, count / best_rows);
}

SemanticUnitMap build_semantic_units(const FeatureGrid& pixels, const std::vector<GridPoint>& meta_points) {
    if (meta_points.empty()) throw ConfigError("build_semantic_units: no meta-points");
    const int L = pixels.cells();
    const int U = static_cast<int>(meta_points.size());
    const int C = pixels.channels();
    SemanticUnitMap units;
    units.grid_h = pixels.rows;
    units.grid_w = pixels.cols;
    units.meta_points = meta_points;

    Mat seeds(U, C);
    for (int u = 0; u < U; ++u) {
        const auto& pt = meta_points[size_t(u)];
        if (pt.row < 0 || pt.row >= pixels.rows || pt.col < 0 || pt.col >= pixels.cols)
            throw ShapeError("build_semantic_units: meta-point outside the grid");
        seeds.row(u) = pixels.values.row(pt.row * pixels.cols + pt.col);
    }
    const Mat affinity = row_normalized(pixels.values) * row_normalized(seeds).transpose(); // L x U

    units.assignment.assign(size_t(L), 0);
    units.member_counts.assign(size_t(U), 0);
    units.unit_embeddings = Mat::Zero(U, C);
    for (int p = 0; p < L; ++p) {
        Eigen::Index best = 0;
        affinity.row(p).maxCoeff(&best); // first maximum
        units.assignment[size_t(p)] = static_cast<int>(best);
        units.member_counts[size_t(best)] += 1;
        units.unit_embeddings.row(best) += pixels.values.row(p);
    }
    for (int u = 0; u < U; ++u)
        if (units.member_counts[size_t(u)] > 0) units.unit_embeddings.row(u) /= double(units.member_counts[size_t(u)]);
    return units;
}

Mat classify_units(const SemanticUnitMap& units, const ClassVocabulary& vocab) {
    if (vocab.size() < 1) throw ConfigError("classify_units: empty vocabulary");
    const Mat texts = row_normalized(vocab.text_matrix);
    Mat scores = Mat::Zero(units.units(), vocab.size());
    for (int u = 0; u < units.units(); ++u) {
        if (units.empty_unit(u)) continue;
        const double n = units.unit_embeddings.row(u).norm();
        if (n == 0.0) throw NumericError("classify_units: zero-norm unit embedding");
        scores.row(u) = (units.unit_embeddings.row(u) / n) * texts.transpose();
    }
    return scores;
}

Mat classify_pixels(const FeatureGrid& pixels, const ClassVocabulary& vocab) {
    if (vocab.size() < 1) throw ConfigError("classify_pixels: empty vocabulary");
    return row_normalized(pixels.values) * row_normalized(vocab.text_matrix).transpose();
}

Mat broadcast_unit_scores(const SemanticUnitMap& units, const Mat& unit_scores) {
    Mat out(Eigen::Index(units.assignment.size()), unit_scores.cols());
    for (size_t p = 0; p < units.assignment.size(); ++p) out.row(Eigen::Index(p)) = unit_scores.row(units.assignment[p]);
    return out;
}

LabelMap argmax_labels(const ScoreMap& logits) {
    LabelMap labels(logits.height, logits.width);
    for (Eigen::Index p = 0; p < logits.scores.rows(); ++p) {
        Eigen::Index best = 0;
        logits.scores.row(p).maxCoeff(&best);
        labels.data[size_t(p)] = static_cast<int>(best);
    }
    return labels;
}

LabelMap apply_background_threshold(const ScoreMap& logits, double threshold) {
    const int K = static_cast<int>(logits.scores.cols());
    LabelMap labels(logits.height, logits.width);
    for (Eigen::Index p = 0; p < logits.scores.rows(); ++p) {
        auto row = logits.scores.row(p);
        Eigen::Index best = 0;
        const double m = row.maxCoeff(&best);
        const double top = 1.0 / (row.array() - m).exp().sum();
        labels.data[size_t(p)] = top < threshold ? K : static_cast<int>(best);
    }
    return labels;
}

void InferenceConfig::validate() const {
    if (window <= 0 || stride <= 0) throw ConfigError("inference: window and stride must be positive");
    if (short_side < window) throw ConfigError("inference: short side smaller than the window");
    if (!pixel_unit && meta_points <= 0) throw ConfigError("inference: meta_points must be positive");
    if (!(logit_scale > 0.0)) throw ConfigError("inference: logit_scale must be positive");
}

std::vector<int> window_offsets(int length, int window, int stride) {
    if (length < window) throw ShapeError("window larger than the image");
    std::vector<int> out;
    int pos = 0;
    while (pos + window < length) {
        out.push_back(pos);
        pos += stride;
    }
    if (out.empty() || out.back() != length - window) out.push_back(length - window);
    return out;
}

Mat score_window(const Image& window, const FrozenImageEncoder& encoder, const Decoder& decoder,
                 const ClassVocabulary& vocab, const InferenceConfig& cfg) {
    const FeatureGrid pixels = decoder.decode(encoder.encode_image(window));
    Mat cell_scores;
    if (cfg.pixel_unit) {
        cell_scores = classify_pixels(pixels, vocab);
    } else {
        const SemanticUnitMap units =
            build_semantic_units(pixels, sample_meta_points(pixels.rows, pixels.cols, cfg.meta_points));
        cell_scores = broadcast_unit_scores(units, classify_units(units, vocab));
    }
    const int cell_h = window.height / pixels.rows;
    const int cell_w = window.width / pixels.cols;
    Mat out(Eigen::Index(window.height) * window.width, cell_scores.cols());
    for (int y = 0; y < window.height; ++y) {
        const int gr = std::min(y / cell_h, pixels.rows - 1);
        for (int x = 0; x < window.width; ++x) {
            const int gc = std::min(x / cell_w, pixels.cols - 1);
            out.row(y * window.width + x) = cell_scores.row(gr * pixels.cols + gc);
        }
    }
    return out;
}

SegmentationResult segment_image(const Image& image, const FrozenImageEncoder& encoder, const Decoder& decoder,
                                 const ClassVocabulary& vocab, const InferenceConfig& cfg) {
    cfg.validate();
    if (image.height <= 0 || image.width <= 0) throw ShapeError("segment_image: empty image");
    if (cfg.window % encoder.patch_size() != 0) throw ConfigError("inference: window must be a multiple of the patch size");
    const double scale = double(cfg.short_side) / std::min(image.height, image.width);
    const int rh = std::max(cfg.short_side, static_cast<int>(std::lround(image.height * scale)));
    const int rw = std::max(cfg.short_side, static_cast<int>(std::lround(image.width * scale)));
    const Image resized = resize_bilinear(image, rh, rw);

    const int K = vocab.size();
    SegmentationResult result;
    result.logits.height = rh;
    result.logits.width = rw;
    result.logits.scores = Mat::Zero(Eigen::Index(rh) * rw, K);
    result.overlap.assign(size_t(rh) * rw, 0);

    Image crop(cfg.window, cfg.window, 3);
    for (int oy : window_offsets(rh, cfg.window, cfg.stride)) {
        for (int ox : window_offsets(rw, cfg.window, cfg.stride)) {
            for (int y = 0; y < cfg.window; ++y) {
                const double* src = &resized.data[(size_t(oy + y) * rw + ox) * 3];
                std::copy(src, src + size_t(cfg.window) * 3, &crop.data[size_t(y) * cfg.window * 3]);
            }
            const Mat scores = score_window(crop, encoder, decoder, vocab, cfg);
            for (int y = 0; y < cfg.window; ++y) {
                for (int x = 0; x < cfg.window; ++x) {
                    const size_t p = size_t(oy + y) * rw + (ox + x);
                    result.logits.scores.row(Eigen::Index(p)) += scores.row(y * cfg.window + x);
                    result.overlap[p] += 1;
                }
            }
            ++result.windows;
        }
    }
    for (size_t p = 0; p < result.overlap.size(); ++p)
        result.logits.scores.row(Eigen::Index(p)) *= cfg.logit_scale / double(result.overlap[p]);

    const LabelMap labels = vocab.has_background
                                ? apply_background_threshold(result.logits, vocab.background_threshold)
                                : argmax_labels(result.logits);
    result.labels = resize_nearest(labels, image.height, image.width);
    return result;
}

} // namespace mgca
