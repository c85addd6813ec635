#include "mgca/encoders.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <random>

namespace mgca {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr double kPositionalScale = 0.05;

Mat gaussian_matrix(std::uint64_t seed, int rows, int cols, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
    return m;
}

} // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t digest_doubles(const double* data, size_t count, std::uint64_t basis) {
    return fnv1a(std::string_view(reinterpret_cast<const char*>(data), count * sizeof(double)), basis);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

ToyImageEncoder::ToyImageEncoder(std::uint64_t seed, int patch_size, int embed_dim)
    : seed_(seed), patch_size_(patch_size), embed_dim_(embed_dim) {
    if (patch_size <= 0 || embed_dim <= 0) throw ConfigError("toy image encoder: patch size and dim must be positive");
    int fan_in = 3 * patch_size * patch_size;
    projection_ = gaussian_matrix(splitmix64(seed ^ 0x1111), fan_in, embed_dim, 1.0 / std::sqrt(double(fan_in)));
}

Vec ToyImageEncoder::positional(int row, int col) const {
    std::uint64_t s = splitmix64(splitmix64(seed_ ^ 0x2222) ^ (std::uint64_t(row) << 32 | std::uint32_t(col)));
    std::mt19937_64 rng(s);
    std::normal_distribution<double> normal(0.0, kPositionalScale);
    Vec v(embed_dim_);
    for (int c = 0; c < embed_dim_; ++c) v[c] = normal(rng);
    return v;
}

FeatureGrid ToyImageEncoder::encode_image(const Image& image) const {
    if (image.channels != 3) throw ShapeError("encode_image: expected a 3-channel image");
    if (image.height <= 0 || image.width <= 0 || image.height % patch_size_ != 0 ||
        image.width % patch_size_ != 0) {
        throw ShapeError("encode_image: image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " is not divisible by patch size " + std::to_string(patch_size_));
    }
    FeatureGrid grid;
    grid.rows = image.height / patch_size_;
    grid.cols = image.width / patch_size_;
    const int fan_in = 3 * patch_size_ * patch_size_;
    Mat patches(grid.cells(), fan_in);
    for (int gr = 0; gr < grid.rows; ++gr) {
        for (int gc = 0; gc < grid.cols; ++gc) {
            int p = gr * grid.cols + gc;
            int k = 0;
            for (int y = 0; y < patch_size_; ++y) {
                const double* src = &image.data[(size_t(gr * patch_size_ + y) * image.width + gc * patch_size_) * 3];
                for (int x = 0; x < patch_size_ * 3; ++x) patches(p, k++) = src[x];
            }
        }
    }
    grid.values = patches * projection_;
    for (int gr = 0; gr < grid.rows; ++gr)
        for (int gc = 0; gc < grid.cols; ++gc) grid.values.row(gr * grid.cols + gc) += positional(gr, gc).transpose();
    return grid;
}

std::uint64_t ToyImageEncoder::parameter_digest() const {
    return digest_doubles(projection_.data(), size_t(projection_.size()), fnv1a(std::to_string(seed_)));
}

ToyTextEncoder::ToyTextEncoder(std::uint64_t seed, int embed_dim, int buckets) : embed_dim_(embed_dim) {
    if (embed_dim <= 0 || buckets <= 0) throw ConfigError("toy text encoder: dim and buckets must be positive");
    table_ = gaussian_matrix(splitmix64(seed ^ 0x3333), buckets, embed_dim, 1.0);
    map_ = gaussian_matrix(splitmix64(seed ^ 0x4444), embed_dim, embed_dim, 1.0 / std::sqrt(double(embed_dim)));
}

int ToyTextEncoder::bucket_of(std::string_view token) const {
    return static_cast<int>(fnv1a(token) % std::uint64_t(table_.rows()));
}

Vec ToyTextEncoder::encode_text(std::string_view caption) const {
    auto tokens = tokenize(caption);
    if (tokens.empty()) throw DataError("encode_text: empty caption");
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(embed_dim_);
    for (const auto& t : tokens) mean += table_.row(bucket_of(t));
    mean /= double(tokens.size());
    return (mean * map_).transpose();
}

std::uint64_t ToyTextEncoder::parameter_digest() const {
    return digest_doubles(map_.data(), size_t(map_.size()), digest_doubles(table_.data(), size_t(table_.size())));
}

std::unique_ptr<FrozenImageEncoder> toy_image_encoder(std::uint64_t seed, int patch_size, int embed_dim) {
    return std::make_unique<ToyImageEncoder>(seed, patch_size, embed_dim);
}

std::unique_ptr<FrozenTextEncoder> toy_text_encoder(std::uint64_t seed, int embed_dim) {
    return std::make_unique<ToyTextEncoder>(seed, embed_dim);
}

} // namespace mgca
