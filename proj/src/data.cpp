#include "mgca/data.hpp"

#include "mgca/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mgca {

std::string shape_name(ShapeKind kind) {
    switch (kind) {
    case ShapeKind::Circle:
        return "circle";
    case ShapeKind::Square:
        return "square";
    case ShapeKind::Triangle:
        return "triangle";
    }
    return "shape";
}

std::vector<Concept> default_concepts() {
    return {
        {"red", {0.9, 0.1, 0.1}, ShapeKind::Circle},     {"green", {0.1, 0.8, 0.15}, ShapeKind::Square},
        {"blue", {0.1, 0.2, 0.9}, ShapeKind::Triangle},  {"yellow", {0.95, 0.9, 0.1}, ShapeKind::Circle},
        {"magenta", {0.9, 0.1, 0.85}, ShapeKind::Square}, {"cyan", {0.1, 0.85, 0.9}, ShapeKind::Triangle},
    };
}

std::vector<std::uint8_t> rasterize(const PlacedShape& shape, int height, int width) {
    std::vector<std::uint8_t> mask(size_t(height) * width, 0);
    const double s = shape.size;
    for (int y = 0; y < height; ++y) {
        const double py = y + 0.5 - shape.cy;
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5 - shape.cx;
            bool inside = false;
            switch (shape.kind) {
            case ShapeKind::Circle:
                inside = px * px + py * py <= s * s;
                break;
            case ShapeKind::Square:
                inside = std::abs(px) <= s && std::abs(py) <= s;
                break;
            case ShapeKind::Triangle:
                // apex (0, -s), base from (-s, s) to (s, s)
                inside = py <= s && py >= -s && std::abs(px) <= (py + s) / 2.0;
                break;
            }
            mask[size_t(y) * width + x] = inside ? 1 : 0;
        }
    }
    return mask;
}

namespace {

double shape_unit_area(ShapeKind kind) {
    switch (kind) {
    case ShapeKind::Circle:
        return std::numbers::pi;
    case ShapeKind::Square:
        return 4.0;
    case ShapeKind::Triangle:
        return 2.0;
    }
    return 1.0;
}

void paint_background(Image& img, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double fx = 0.02 + 0.06 * uni(rng);
    const double fy = 0.02 + 0.06 * uni(rng);
    const double phase = 2.0 * std::numbers::pi * uni(rng);
    const double base = 0.42 + 0.16 * uni(rng);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double g = base + 0.06 * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + phase) +
                       0.08 * (uni(rng) - 0.5);
            g = std::clamp(g, 0.0, 1.0);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = g;
        }
    }
}

bool try_sample(const SyntheticConfig& cfg, std::mt19937_64& rng, SyntheticSample& out) {
    const int N = cfg.image_size;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> count_dist(cfg.min_objects, cfg.max_objects);
    const int n_objects = count_dist(rng);

    std::vector<int> order(cfg.concepts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), rng);

    out = SyntheticSample{};
    out.image = Image(N, N, 3);
    out.gt_mask = LabelMap(N, N, 0);
    std::vector<std::uint8_t> occupied(size_t(N) * N, 0);
    paint_background(out.image, rng);

    const double per_object_max = std::min(0.16, cfg.max_area / n_objects);
    for (int k = 0; k < n_objects; ++k) {
        const int ci = order[size_t(k)];
        const Concept& c = cfg.concepts[size_t(ci)];
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            PlacedShape shape;
            shape.concept_index = ci;
            shape.kind = c.shape;
            const double frac = 0.04 + (per_object_max - 0.04) * uni(rng);
            shape.size = std::sqrt(frac * N * N / shape_unit_area(c.shape));
            if (2.0 * shape.size >= N - 2) continue;
            shape.cx = shape.size + 1 + (N - 2 - 2 * shape.size) * uni(rng);
            shape.cy = shape.size + 1 + (N - 2 - 2 * shape.size) * uni(rng);
            auto raster = rasterize(shape, N, N);
            bool clash = false;
            int area = 0;
            for (size_t p = 0; p < raster.size() && !clash; ++p) {
                if (!raster[p]) continue;
                clash = occupied[p] != 0;
                ++area;
            }
            if (clash || area == 0) continue;
            shape.area = area;
            for (size_t p = 0; p < raster.size(); ++p) {
                if (!raster[p]) continue;
                occupied[p] = 1;
                out.gt_mask.data[p] = ci + 1;
                for (int ch = 0; ch < 3; ++ch)
                    out.image.data[p * 3 + ch] = std::clamp(c.rgb[ch] + 0.06 * (uni(rng) - 0.5), 0.0, 1.0);
            }
            out.shapes.push_back(shape);
            out.class_set.push_back(ci);
            out.nouns.push_back(c.name());
            placed = true;
        }
        if (!placed) return false;
    }
    int fg = 0;
    for (auto v : occupied) fg += v;
    const double fraction = double(fg) / (double(N) * N);
    if (fraction < cfg.min_area || fraction > cfg.max_area) return false;

    std::string caption = "a photo of a " + out.nouns[0];
    for (size_t k = 1; k < out.nouns.size(); ++k) caption += " and a " + out.nouns[k];
    out.caption = caption;
    return true;
}

} // namespace

std::vector<SyntheticSample> gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.image_size <= 0 || cfg.patch_size <= 0 || cfg.image_size % cfg.patch_size != 0)
        throw ConfigError("gen_synthetic: image size must be a positive multiple of the patch size");
    if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
        throw ConfigError("gen_synthetic: invalid object count range");
    if (int(cfg.concepts.size()) < cfg.max_objects)
        throw DataError("gen_synthetic: " + std::to_string(cfg.concepts.size()) +
                        " concepts cannot supply " + std::to_string(cfg.max_objects) + " distinct objects");
    if (cfg.n_samples < 0) throw ConfigError("gen_synthetic: negative sample count");
    std::mt19937_64 rng(cfg.seed);
    std::vector<SyntheticSample> out;
    out.reserve(size_t(cfg.n_samples));
    for (int i = 0; i < cfg.n_samples; ++i) {
        SyntheticSample s;
        int attempts = 0;
        while (!try_sample(cfg, rng, s)) {
            if (++attempts > 1000) throw DataError("gen_synthetic: cannot satisfy the area constraints");
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> augment_captions(const std::string& caption, const std::vector<std::string>& nouns,
                                          const std::vector<std::string>& templates) {
    (void)caption;
    std::vector<std::string> out;
    out.reserve(nouns.size() * templates.size());
    for (const auto& noun : nouns) {
        for (const auto& t : templates) {
            std::string s = t;
            auto pos = s.find("{}");
            if (pos == std::string::npos)
                s += " " + noun;
            else
                s.replace(pos, 2, noun);
            out.push_back(std::move(s));
        }
    }
    return out;
}

const std::string& CaptionSampler::pick(const std::string& original, const std::vector<std::string>& generated) {
    if (generated.empty()) return original;
    std::uniform_int_distribution<size_t> dist(0, generated.size());
    const size_t k = dist(rng_);
    return k == 0 ? original : generated[k - 1];
}

namespace {

std::string sample_id(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

} // namespace

Dataset to_dataset(const std::vector<SyntheticSample>& samples, const std::vector<Concept>& concepts) {
    Dataset ds;
    ds.classes.push_back("background");
    for (const auto& c : concepts) ds.classes.push_back(c.name());
    for (size_t i = 0; i < samples.size(); ++i)
        ds.records.push_back({sample_id(i), samples[i].image, samples[i].gt_mask, samples[i].caption, samples[i].nouns});
    return ds;
}

void write_dataset(const std::filesystem::path& root, const std::vector<SyntheticSample>& samples,
                   const std::vector<Concept>& concepts) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    const Dataset ds = to_dataset(samples, concepts);
    {
        std::ofstream classes(root / "classes.txt");
        if (!classes) throw IoError("cannot write " + (root / "classes.txt").string());
        for (const auto& c : ds.classes) classes << c << "\n";
    }
    std::ofstream captions(root / "captions.tsv");
    if (!captions) throw IoError("cannot write " + (root / "captions.tsv").string());
    for (const auto& r : ds.records) {
        write_ppm(root / "images" / (r.id + ".ppm"), r.image);
        write_pgm(root / "masks" / (r.id + ".pgm"), r.mask);
        captions << r.id << "\t" << r.caption << "\t";
        for (size_t k = 0; k < r.nouns.size(); ++k) captions << (k ? ";" : "") << r.nouns[k];
        captions << "\n";
    }
}

Dataset read_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
    if (!fs::is_directory(root / "images")) throw DataError("dataset has no images/ directory: " + root.string());
    Dataset ds;
    std::ifstream classes(root / "classes.txt");
    if (!classes) throw DataError("dataset has no classes.txt: " + root.string());
    for (std::string line; std::getline(classes, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ds.classes.push_back(line);
    }
    if (ds.classes.size() < 2) throw DataError("classes.txt must list the background and at least one class");

    const bool has_masks = fs::is_directory(root / "masks");
    std::vector<std::string> ids;
    std::vector<std::pair<std::string, std::vector<std::string>>> text;
    std::ifstream captions(root / "captions.tsv");
    if (captions) {
        for (std::string line; std::getline(captions, line);) {
            if (line.empty()) continue;
            auto cols = split(line, '\t');
            ids.push_back(cols[0]);
            std::vector<std::string> nouns;
            if (cols.size() > 2)
                for (auto& n : split(cols[2], ';'))
                    if (!n.empty()) nouns.push_back(n);
            text.emplace_back(cols.size() > 1 ? cols[1] : std::string{}, std::move(nouns));
        }
    } else {
        for (const auto& entry : fs::directory_iterator(root / "images"))
            if (entry.path().extension() == ".ppm") ids.push_back(entry.path().stem().string());
        std::sort(ids.begin(), ids.end());
        text.resize(ids.size());
    }
    for (size_t i = 0; i < ids.size(); ++i) {
        DatasetRecord r;
        r.id = ids[i];
        const fs::path img = root / "images" / (r.id + ".ppm");
        if (!fs::exists(img)) throw DataError("missing image " + img.string());
        r.image = read_ppm(img);
        const fs::path mask = root / "masks" / (r.id + ".pgm");
        if (has_masks) {
            if (!fs::exists(mask)) throw DataError("missing mask " + mask.string());
            r.mask = read_pgm(mask);
            if (r.mask.height != r.image.height || r.mask.width != r.image.width)
                throw DataError("mask and image sizes differ for " + r.id);
        }
        r.caption = text[i].first;
        r.nouns = text[i].second;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

} // namespace mgca
