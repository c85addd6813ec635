#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mgca {

enum class ShapeKind { Circle, Square, Triangle };

std::string shape_name(ShapeKind kind);

/// One (color, shape) concept; its name ("red circle") is the caption noun
/// phrase and the class name.
struct Concept {
    std::string color;
    double rgb[3] = {0, 0, 0};
    ShapeKind shape = ShapeKind::Circle;

    std::string name() const { return color + " " + shape_name(shape); }
};

/// Six concepts, each with its own color.
std::vector<Concept> default_concepts();

struct PlacedShape {
    int concept_index = 0;
    ShapeKind kind = ShapeKind::Circle;
    double cx = 0, cy = 0, size = 0; // centre and half-extent in pixels
    int area = 0;                     // rasterized pixel count
};

/// Pixel-centre containment raster of one shape.
std::vector<std::uint8_t> rasterize(const PlacedShape& shape, int height, int width);

struct SyntheticSample {
    Image image;
    std::string caption;
    std::vector<std::string> nouns; // concept names present, in caption order
    LabelMap gt_mask;               // 0 background, concept index + 1 otherwise
    std::vector<int> class_set;     // concept indices present
    std::vector<PlacedShape> shapes;
};

struct SyntheticConfig {
    std::uint64_t seed = 0;
    int n_samples = 500;
    int image_size = 64;
    int patch_size = 16;
    int min_objects = 1;
    int max_objects = 3;
    double min_area = 0.05; // bounds on the total foreground fraction
    double max_area = 0.6;
    std::vector<Concept> concepts = default_concepts();
};

/// Throws ConfigError for a size not divisible by the patch size and
/// DataError when the concept list cannot supply max_objects distinct colors.
std::vector<SyntheticSample> gen_synthetic(const SyntheticConfig& cfg);

/// One prompted caption per (noun, template) pair, nouns outermost.
std::vector<std::string> augment_captions(const std::string& caption, const std::vector<std::string>& nouns,
                                          const std::vector<std::string>& templates);

/// Picks uniformly among the original caption and its generated variants.
class CaptionSampler {
  public:
    explicit CaptionSampler(std::uint64_t seed) : rng_(seed) {}
    const std::string& pick(const std::string& original, const std::vector<std::string>& generated);

  private:
    std::mt19937_64 rng_;
};

/// On-disk layout: images/<id>.ppm, masks/<id>.pgm (class index per pixel),
/// classes.txt (one name per line; line n is mask value n, line 0 the
/// background) and captions.tsv (<id> TAB caption TAB noun;noun...).
struct DatasetRecord {
    std::string id;
    Image image;
    LabelMap mask;
    std::string caption;
    std::vector<std::string> nouns;
};

struct Dataset {
    std::vector<std::string> classes; // classes[0] is the background
    std::vector<DatasetRecord> records;
};

void write_dataset(const std::filesystem::path& root, const std::vector<SyntheticSample>& samples,
                   const std::vector<Concept>& concepts);

/// Throws DataError when the directory or any listed file is missing.
/// Captions are optional (evaluation-only sets carry none), and so is masks/ (caption-only
/// training sets); when masks/ exists every image needs its mask.
Dataset read_dataset(const std::filesystem::path& root);

Dataset to_dataset(const std::vector<SyntheticSample>& samples, const std::vector<Concept>& concepts);

} // namespace mgca
