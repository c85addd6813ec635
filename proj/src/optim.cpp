#include "mgca/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mgca {

AdamW::AdamW(const std::vector<NamedParam>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params) {
        m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
}

void AdamW::step(std::vector<NamedParam>& params, const std::vector<Mat>& grads, double lr, double weight_decay) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("AdamW: parameter list changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        Mat& w = params[i].value;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
        if (lr == 0.0) continue;
        w *= 1.0 - lr * weight_decay;
        w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
}

double cosine_lr(double base, int step, int warmup, int total) {
    if (warmup > 0 && step < warmup) return base * double(step + 1) / double(warmup);
    const int span = total - warmup;
    if (span <= 0) return base;
    const double progress = std::min(1.0, double(step - warmup) / double(span));
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace mgca
