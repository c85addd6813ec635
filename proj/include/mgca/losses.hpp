#pragma once

#include "mgca/alignment.hpp"

#include <string>
#include <vector>

namespace mgca {

/// Every hyperparameter of the objective and the optimisation schedule.
struct TrainConfig {
    double tau = 0.07;
    double k = 0.4;      // positive object area fraction
    double k_n = 0.05;   // hard negative region area fraction
    double k_pix = 0.06; // semi-hard positive rank fraction
    double f = 0.0;      // similarity scale; <= 0 means 5 * sqrt(C)
    int batch_size = 32;
    double learning_rate = 1e-3;
    int steps = 2000;
    int warmup_steps = 200;
    double weight_decay = 0.05;
    bool use_obj = true;
    bool use_reg = true;
    bool use_pix = true;

    double scale_for(int channels) const;
    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double obj = 0.0;
    double reg = 0.0;
    double pix = 0.0;
};

/// Throws NumericError on a zero-norm argument.
double cosine(const Vec& x, const Vec& y);

/// Gradient of a loss with respect to the object representations and texts.
struct RepresentationGrad {
    std::vector<Vec> reps; // index i*B + j
    Mat texts;
};

double loss_object(const ObjectRepresentation& reps, const Mat& texts, double tau,
                   RepresentationGrad* grad = nullptr);
double loss_region(const ObjectRepresentation& reps, const Mat& texts, double tau,
                   RepresentationGrad* grad = nullptr);

struct PixelPairs {
    int rank = 1;                        // r: 1-based rank of the semi-hard positive
    Vec positive;                        // S+_i, B
    Mat negative;                        // S-_ij, B x B (diagonal unused, zero)
    std::vector<int> positive_index;     // pixel chosen for S+_i
    std::vector<std::vector<int>> negative_index; // pixel chosen for S-_ij (-1 on the diagonal)
};

/// r = max(1, round(k_pix * L)) over the full diagonal row.
int semi_hard_rank(int pixels, double k_pix);

PixelPairs mine_pixel_pairs(const SimilarityTensor& s, double k_pix, double f);

/// Accumulates into grad_s when non-null. Selection is piecewise constant.
double loss_pixel(const SimilarityTensor& s, double k_pix, double f, double tau,
                  SimilarityTensor* grad_s = nullptr);

struct EmbeddingGrad {
    std::vector<Mat> V;
    Mat T;
};

/// Sum of the enabled objectives, sharing one similarity tensor. Throws
/// NumericError naming the component if any value is not finite.
LossBreakdown loss_total(const BatchEmbeddings& batch, const TrainConfig& cfg, EmbeddingGrad* grad = nullptr);

} // namespace mgca
