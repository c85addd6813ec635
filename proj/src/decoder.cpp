#include "mgca/decoder.hpp"

#include "mgca/resize.hpp"

#include <cmath>
#include <random>

namespace mgca {

namespace {

constexpr int kTaps = 9;

Mat im2col(const Mat& z, int images, int rows, int cols) {
    const int C = static_cast<int>(z.cols());
    Mat out = Mat::Zero(z.rows(), kTaps * C);
    for (int n = 0; n < images; ++n) {
        const int base = n * rows * cols;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                auto dst = out.row(base + r * cols + c);
                for (int dy = -1; dy <= 1; ++dy) {
                    int rr = r + dy;
                    if (rr < 0 || rr >= rows) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        int cc = c + dx;
                        if (cc < 0 || cc >= cols) continue;
                        int tap = (dy + 1) * 3 + (dx + 1);
                        dst.segment(tap * C, C) = z.row(base + rr * cols + cc);
                    }
                }
            }
        }
    }
    return out;
}

// Adjoint of im2col.
Mat col2im(const Mat& col, int images, int rows, int cols, int C) {
    Mat out = Mat::Zero(col.rows(), C);
    for (int n = 0; n < images; ++n) {
        const int base = n * rows * cols;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                auto src = col.row(base + r * cols + c);
                for (int dy = -1; dy <= 1; ++dy) {
                    int rr = r + dy;
                    if (rr < 0 || rr >= rows) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        int cc = c + dx;
                        if (cc < 0 || cc >= cols) continue;
                        int tap = (dy + 1) * 3 + (dx + 1);
                        out.row(base + rr * cols + cc) += src.segment(tap * C, C);
                    }
                }
            }
        }
    }
    return out;
}

Mat sigmoid(const Mat& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

} // namespace

Decoder::Decoder(int channels, std::uint64_t seed, int upscale, int blocks)
    : channels_(channels), upscale_(upscale), blocks_(blocks) {
    if (channels <= 0 || upscale <= 0 || blocks < 0) throw ConfigError("decoder: invalid geometry");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(kTaps * channels)));
    auto weight = [&] {
        Mat w(kTaps * channels, channels);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
        return w;
    };
    for (int b = 0; b < blocks; ++b) {
        std::string prefix = "block" + std::to_string(b) + ".";
        params_.push_back({prefix + "value.weight", weight()});
        params_.push_back({prefix + "value.bias", Mat::Zero(1, channels)});
        params_.push_back({prefix + "gate.weight", weight()});
        params_.push_back({prefix + "gate.bias", Mat::Zero(1, channels)});
    }
}

size_t Decoder::parameter_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += size_t(p.value.size());
    return n;
}

NamedParam& Decoder::parameter(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return p;
    throw ConfigError("decoder: no parameter named " + name);
}

void Decoder::zero_value_paths() {
    for (int b = 0; b < blocks_; ++b) {
        params_[4 * b].value.setZero();
        params_[4 * b + 1].value.setZero();
    }
}

FeatureGrid Decoder::upsample(const FeatureGrid& features) const {
    if (features.channels() != channels_)
        throw ShapeError("decode: expected " + std::to_string(channels_) + " channels, got " +
                         std::to_string(features.channels()));
    return resize_bilinear(features, features.rows * upscale_, features.cols * upscale_);
}

FeatureGrid Decoder::decode(const FeatureGrid& features) const {
    FeatureGrid up = upsample(features);
    up.values = forward_blocks(up.values, 1, up.rows, up.cols);
    return up;
}

Mat Decoder::forward_blocks(const Mat& stacked, int images, int rows, int cols, Trace* trace) const {
    if (stacked.cols() != channels_) throw ShapeError("decoder: channel mismatch");
    if (stacked.rows() != Eigen::Index(images) * rows * cols) throw ShapeError("decoder: stacked row count mismatch");
    if (trace) {
        *trace = Trace{};
        trace->images = images;
        trace->rows = rows;
        trace->cols = cols;
    }
    Mat z = stacked;
    for (int b = 0; b < blocks_; ++b) {
        const Mat& wv = params_[4 * b].value;
        const Mat& bv = params_[4 * b + 1].value;
        const Mat& wg = params_[4 * b + 2].value;
        const Mat& bg = params_[4 * b + 3].value;
        Mat col = im2col(z, images, rows, cols);
        Mat value = col * wv;
        value.rowwise() += bv.row(0);
        Mat gate_pre = col * wg;
        gate_pre.rowwise() += bg.row(0);
        Mat gate = sigmoid(gate_pre);
        z += gate.cwiseProduct(value);
        if (trace) {
            trace->im2col.push_back(std::move(col));
            trace->value.push_back(std::move(value));
            trace->gate.push_back(std::move(gate));
        }
    }
    return z;
}

Mat Decoder::backward_blocks(const Trace& trace, const Mat& grad_out, std::vector<Mat>& grads) const {
    if (grads.size() != params_.size()) throw ShapeError("decoder backward: gradient list mismatch");
    Mat dz = grad_out;
    for (int b = blocks_ - 1; b >= 0; --b) {
        const Mat& col = trace.im2col[b];
        const Mat& value = trace.value[b];
        const Mat& gate = trace.gate[b];
        Mat d_value = dz.cwiseProduct(gate);
        Mat d_gate = dz.cwiseProduct(value).cwiseProduct(gate.cwiseProduct((1.0 - gate.array()).matrix()));
        grads[4 * b].noalias() += col.transpose() * d_value;
        grads[4 * b + 1] += d_value.colwise().sum();
        grads[4 * b + 2].noalias() += col.transpose() * d_gate;
        grads[4 * b + 3] += d_gate.colwise().sum();
        Mat d_col = d_value * params_[4 * b].value.transpose();
        d_col.noalias() += d_gate * params_[4 * b + 2].value.transpose();
        dz += col2im(d_col, trace.images, trace.rows, trace.cols, channels_);
    }
    return dz;
}

std::vector<Mat> Decoder::zero_gradients() const {
    std::vector<Mat> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    return g;
}

} // namespace mgca
