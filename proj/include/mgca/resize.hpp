#pragma once

#include "mgca/common.hpp"

namespace mgca {

// Half-pixel-centred bilinear interpolation (sample point (dst+0.5)*in/out-0.5,
// edge-clamped). Used for the decoder upsampling and image rescaling.
Mat resize_bilinear(const Mat& src, int in_rows, int in_cols, int out_rows, int out_cols);
FeatureGrid resize_bilinear(const FeatureGrid& grid, int out_rows, int out_cols);
Image resize_bilinear(const Image& image, int out_height, int out_width);

LabelMap resize_nearest(const LabelMap& labels, int out_height, int out_width);

} // namespace mgca
