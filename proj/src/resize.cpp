#include "mgca/resize.hpp"

#include <algorithm>
#include <cmath>

namespace mgca {

namespace {

struct Tap {
    int lo;
    int hi;
    double w_hi;
};

std::vector<Tap> taps(int in, int out) {
    std::vector<Tap> t(out);
    double scale = double(in) / double(out);
    for (int d = 0; d < out; ++d) {
        double s = (d + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, double(in - 1));
        int lo = static_cast<int>(std::floor(s));
        int hi = std::min(lo + 1, in - 1);
        t[d] = {lo, hi, s - lo};
    }
    return t;
}

} // namespace

Mat resize_bilinear(const Mat& src, int in_rows, int in_cols, int out_rows, int out_cols) {
    if (src.rows() != Eigen::Index(in_rows) * in_cols) throw ShapeError("resize_bilinear: grid size mismatch");
    if (out_rows <= 0 || out_cols <= 0) throw ShapeError("resize_bilinear: empty output");
    auto ty = taps(in_rows, out_rows);
    auto tx = taps(in_cols, out_cols);
    Mat out(Eigen::Index(out_rows) * out_cols, src.cols());
    for (int r = 0; r < out_rows; ++r) {
        const Tap& a = ty[r];
        for (int c = 0; c < out_cols; ++c) {
            const Tap& b = tx[c];
            auto p00 = src.row(a.lo * in_cols + b.lo);
            auto p01 = src.row(a.lo * in_cols + b.hi);
            auto p10 = src.row(a.hi * in_cols + b.lo);
            auto p11 = src.row(a.hi * in_cols + b.hi);
            out.row(r * out_cols + c) = (1 - a.w_hi) * ((1 - b.w_hi) * p00 + b.w_hi * p01) +
                                        a.w_hi * ((1 - b.w_hi) * p10 + b.w_hi * p11);
        }
    }
    return out;
}

FeatureGrid resize_bilinear(const FeatureGrid& grid, int out_rows, int out_cols) {
    FeatureGrid out;
    out.rows = out_rows;
    out.cols = out_cols;
    out.values = resize_bilinear(grid.values, grid.rows, grid.cols, out_rows, out_cols);
    return out;
}

Image resize_bilinear(const Image& image, int out_height, int out_width) {
    if (image.height == out_height && image.width == out_width) return image;
    Eigen::Map<const Mat> src(image.data.data(), Eigen::Index(image.height) * image.width, image.channels);
    Mat dst = resize_bilinear(Mat(src), image.height, image.width, out_height, out_width);
    Image out(out_height, out_width, image.channels);
    std::copy(dst.data(), dst.data() + dst.size(), out.data.begin());
    return out;
}

LabelMap resize_nearest(const LabelMap& labels, int out_height, int out_width) {
    if (labels.height == out_height && labels.width == out_width) return labels;
    LabelMap out(out_height, out_width);
    for (int r = 0; r < out_height; ++r) {
        int sr = std::min(labels.height - 1, int((r + 0.5) * labels.height / out_height));
        for (int c = 0; c < out_width; ++c) {
            int sc = std::min(labels.width - 1, int((c + 0.5) * labels.width / out_width));
            out.at(r, c) = labels.at(sr, sc);
        }
    }
    return out;
}

} // namespace mgca
