#pragma once

#include "mgca/decoder.hpp"

#include <vector>

namespace mgca {

/// Adam with decoupled weight decay.
class AdamW {
  public:
    explicit AdamW(const std::vector<NamedParam>& params, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    void step(std::vector<NamedParam>& params, const std::vector<Mat>& grads, double lr, double weight_decay);
    int steps_taken() const { return t_; }

  private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Mat> m_;
    std::vector<Mat> v_;
};

/// Linear warmup over the first `warmup` steps, then cosine annealing to zero
/// at `total`. `step` is zero-based.
double cosine_lr(double base, int step, int warmup, int total);

} // namespace mgca
