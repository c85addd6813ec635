#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgca {

// Row-major so that one pixel embedding (one row) is contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class DataError : public Error {
  public:
    using Error::Error;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

// H x W x channels, row-major interleaved.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c = 3, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, fill) {}

    double& at(int r, int c, int ch) { return data[(static_cast<size_t>(r) * width + c) * channels + ch]; }
    double at(int r, int c, int ch) const {
        return data[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
};

// Integer label map, row-major.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<int> data;

    LabelMap() = default;
    LabelMap(int h, int w, int fill = 0) : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    int& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    int at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

// Spatial feature grid: (rows*cols) x C matrix, pixel index p = row*cols + col.
struct FeatureGrid {
    int rows = 0;
    int cols = 0;
    Mat values;

    int channels() const { return static_cast<int>(values.cols()); }
    int cells() const { return rows * cols; }
};

} // namespace mgca
