#pragma once

#include "mgca/common.hpp"
#include "mgca/decoder.hpp"
#include "mgca/encoders.hpp"

#include <string>
#include <vector>

namespace mgca {

/// Class names, the prompts used to embed them, and one text row per class.
struct ClassVocabulary {
    std::vector<std::string> class_names;
    std::vector<std::string> prompt_templates;
    Mat text_matrix; // K x C
    bool has_background = false;
    double background_threshold = 0.5;

    int size() const { return static_cast<int>(class_names.size()); }
};

/// Templates use "{}" as the name slot.
std::vector<std::string> default_prompt_templates();
std::string fill_template(const std::string& tmpl, const std::string& name);

/// Row k is the mean of the embeddings of class k's prompted captions.
ClassVocabulary build_vocabulary(const std::vector<std::string>& class_names,
                                 const std::vector<std::string>& templates, const FrozenTextEncoder& text_encoder,
                                 bool has_background = false, double background_threshold = 0.5);

struct GridPoint {
    int row = 0;
    int col = 0;
    bool operator==(const GridPoint&) const = default;
};

/// m x m lattice at floor((i + 0.5) * extent / m) for count = m^2; every cell
/// when count equals the number of cells; otherwise the divisor pair of
/// count that fits the grid with the closest aspect ratio. Throws ConfigError
/// when count exceeds the cell count or no lattice fits.
std::vector<GridPoint> sample_meta_points(int grid_h, int grid_w, int count);

struct SemanticUnitMap {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<GridPoint> meta_points;
    std::vector<int> assignment;  // pixel -> unit
    Mat unit_embeddings;          // U x C, member mean (zero for empty units)
    std::vector<int> member_counts;

    int units() const { return static_cast<int>(meta_points.size()); }
    bool empty_unit(int u) const { return member_counts[size_t(u)] == 0; }
};

/// Assigns every pixel to the meta-point whose embedding is most cosine-similar
/// (lowest index on ties), then averages the members of each unit.
SemanticUnitMap build_semantic_units(const FeatureGrid& pixels, const std::vector<GridPoint>& meta_points);

/// Cosine between each non-empty unit embedding and each class row (U x K);
/// rows of empty units are left at zero and never broadcast.
Mat classify_units(const SemanticUnitMap& units, const ClassVocabulary& vocab);

/// Pixel-wise baseline: cosine of every pixel embedding against every class (L x K).
Mat classify_pixels(const FeatureGrid& pixels, const ClassVocabulary& vocab);

/// Member pixels inherit the scores of their unit (L x K).
Mat broadcast_unit_scores(const SemanticUnitMap& units, const Mat& unit_scores);

/// Per-pixel class scores over an H x W raster.
struct ScoreMap {
    int height = 0;
    int width = 0;
    Mat scores; // (H*W) x K
};

/// Argmax over classes, lowest index on ties.
LabelMap argmax_labels(const ScoreMap& logits);

/// Softmax over the K foreground logits; background index K when the top
/// probability is below the threshold, argmax otherwise.
LabelMap apply_background_threshold(const ScoreMap& logits, double threshold);

struct InferenceConfig {
    int short_side = 448;
    int window = 224;
    int stride = 112;
    int meta_points = 36;      // ignored when pixel_unit is set
    bool pixel_unit = false;   // classify every pixel embedding on its own
    double logit_scale = 1.0 / 0.07;

    void validate() const;
};

struct SegmentationResult {
    LabelMap labels; // original resolution; vocab.size() marks background
    ScoreMap logits; // resized resolution, logit_scale * mean window cosine
    std::vector<int> overlap; // per resized pixel window count
    int windows = 0;
};

/// Window start offsets along one axis (last window flush with the end).
std::vector<int> window_offsets(int length, int window, int stride);

/// Encode, decode and classify one window-sized image; returns cell-level
/// cosine scores broadcast to the window's pixels ((win*win) x K).
Mat score_window(const Image& window, const FrozenImageEncoder& encoder, const Decoder& decoder,
                 const ClassVocabulary& vocab, const InferenceConfig& cfg);

SegmentationResult segment_image(const Image& image, const FrozenImageEncoder& encoder, const Decoder& decoder,
                                 const ClassVocabulary& vocab, const InferenceConfig& cfg);

} // namespace mgca
