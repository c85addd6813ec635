#pragma once

#include "mgca/common.hpp"

#include <filesystem>

namespace mgca {

// Binary 8-bit netpbm: P6 for RGB images, P5 for label masks.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Values are stored verbatim; throws DataError for labels outside [0, 255].
LabelMap read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);

} // namespace mgca
