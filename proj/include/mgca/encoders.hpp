#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace mgca {

/// Frozen image backbone. Implementations return the spatial patch grid only
/// (no global token) and never change after construction.
class FrozenImageEncoder {
  public:
    virtual ~FrozenImageEncoder() = default;

    virtual int patch_size() const = 0;
    virtual int embed_dim() const = 0;

    /// Throws ShapeError unless height and width are multiples of patch_size().
    virtual FeatureGrid encode_image(const Image& image) const = 0;

    /// Stable fingerprint of the parameter bytes; used to assert freezing.
    virtual std::uint64_t parameter_digest() const = 0;
};

class FrozenTextEncoder {
  public:
    virtual ~FrozenTextEncoder() = default;

    virtual int embed_dim() const = 0;

    /// Throws DataError on an empty (or token-free) caption.
    virtual Vec encode_text(std::string_view caption) const = 0;

    virtual std::uint64_t parameter_digest() const = 0;
};

/// Seeded random linear projection of each patch's flattened RGB plus a
/// fixed positional term per (row, col) patch location.
class ToyImageEncoder final : public FrozenImageEncoder {
  public:
    ToyImageEncoder(std::uint64_t seed, int patch_size, int embed_dim);

    int patch_size() const override { return patch_size_; }
    int embed_dim() const override { return embed_dim_; }
    FeatureGrid encode_image(const Image& image) const override;
    std::uint64_t parameter_digest() const override;

    const Mat& projection() const { return projection_; }
    /// Positional term for the patch at (row, col); independent of grid size.
    Vec positional(int row, int col) const;

  private:
    std::uint64_t seed_;
    int patch_size_;
    int embed_dim_;
    Mat projection_; // (3*ps*ps) x C
};

/// Mean of hash-bucketed token embeddings followed by a fixed C x C map.
class ToyTextEncoder final : public FrozenTextEncoder {
  public:
    static constexpr int kDefaultBuckets = 4096;

    ToyTextEncoder(std::uint64_t seed, int embed_dim, int buckets = kDefaultBuckets);

    int embed_dim() const override { return embed_dim_; }
    Vec encode_text(std::string_view caption) const override;
    std::uint64_t parameter_digest() const override;

    int bucket_of(std::string_view token) const;
    const Mat& token_table() const { return table_; }
    const Mat& output_map() const { return map_; }

  private:
    int embed_dim_;
    Mat table_; // buckets x C
    Mat map_;   // C x C, applied as row-vector * map_
};

std::unique_ptr<FrozenImageEncoder> toy_image_encoder(std::uint64_t seed, int patch_size, int embed_dim);
std::unique_ptr<FrozenTextEncoder> toy_text_encoder(std::uint64_t seed, int embed_dim);

/// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 1469598103934665603ull);
std::uint64_t digest_doubles(const double* data, size_t count, std::uint64_t basis = 1469598103934665603ull);

} // namespace mgca
