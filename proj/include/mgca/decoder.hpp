#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mgca {

struct NamedParam {
    std::string name;
    Mat value;
};

/// Trainable head mapping frozen patch features to dense pixel embeddings:
/// bilinear upsampling followed by gated convolution blocks
///     out = z + sigmoid(conv_gate(z)) * conv_value(z)
/// with 3x3 zero-padded convolutions at width C.
class Decoder {
  public:
    /// Per-block activations kept for the backward pass.
    struct Trace {
        int images = 0;
        int rows = 0;
        int cols = 0;
        std::vector<Mat> im2col; // N x 9C per block
        std::vector<Mat> value;  // N x C per block
        std::vector<Mat> gate;   // sigmoid output, N x C per block
    };

    Decoder(int channels, std::uint64_t seed, int upscale = 2, int blocks = 2);

    int channels() const { return channels_; }
    int upscale() const { return upscale_; }
    int blocks() const { return blocks_; }

    std::vector<NamedParam>& parameters() { return params_; }
    const std::vector<NamedParam>& parameters() const { return params_; }
    size_t parameter_count() const;
    NamedParam& parameter(const std::string& name);

    /// Zero every value-path weight and bias so each block reduces to identity.
    void zero_value_paths();

    FeatureGrid upsample(const FeatureGrid& features) const;

    /// Upsample then run the blocks; output grid is upscale x the input grid.
    FeatureGrid decode(const FeatureGrid& features) const;

    /// Blocks only, on `images` already-upsampled grids stacked row-wise
    /// (images*rows*cols x C). Fills `trace` when non-null.
    Mat forward_blocks(const Mat& stacked, int images, int rows, int cols, Trace* trace = nullptr) const;

    /// Accumulates parameter gradients into `grads` (same order as
    /// parameters()) and returns d(loss)/d(input of the first block).
    Mat backward_blocks(const Trace& trace, const Mat& grad_out, std::vector<Mat>& grads) const;

    std::vector<Mat> zero_gradients() const;

  private:
    int channels_;
    int upscale_;
    int blocks_;
    std::vector<NamedParam> params_; // per block: value.weight, value.bias, gate.weight, gate.bias
};

} // namespace mgca
