#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <vector>

namespace mgca {

using Mask = std::vector<std::uint8_t>;

/// Per-batch dense pixel embeddings V (B of L x C) and text embeddings T (B x C).
struct BatchEmbeddings {
    std::vector<Mat> V;
    Mat T;

    int batch() const { return static_cast<int>(V.size()); }
    int pixels() const { return V.empty() ? 0 : static_cast<int>(V.front().rows()); }
    int channels() const { return static_cast<int>(T.cols()); }

    /// Throws ShapeError/NumericError on inconsistent shapes or non-finite values.
    void validate() const;
};

/// S[i][j][p] = dot(V_i^p, T_j), stored per image as an L x B block.
struct SimilarityTensor {
    std::vector<Mat> per_image;

    int batch() const { return static_cast<int>(per_image.size()); }
    int pixels() const { return per_image.empty() ? 0 : static_cast<int>(per_image.front().rows()); }
    double at(int i, int j, int p) const { return per_image[i](p, j); }
    Vec row(int i, int j) const { return per_image[i].col(j); }

    static SimilarityTensor zeros(int batch, int pixels);
};

SimilarityTensor similarity(const BatchEmbeddings& batch);

/// Accumulates dV and dT given dS.
void similarity_backward(const BatchEmbeddings& batch, const SimilarityTensor& grad_s, std::vector<Mat>& grad_v,
                         Mat& grad_t);

Vec softmax(const Vec& logits);
Vec prob_map(const SimilarityTensor& s, int i, int j);

/// max(1, ceil(fraction * L)); throws ConfigError unless 0 < fraction <= 1.
int mask_cardinality(int pixels, double area_fraction);

/// Ones at the ceil(fraction*L) largest entries; equal values resolve to the
/// lower pixel index.
Mask topk_mask(const Vec& prob, double area_fraction);

/// sum_p prob[p] * mask[p] * V_i[p].
Vec object_representation(const Mat& pixels, const Vec& prob, const Mask& mask);

/// R[i][j] for every image/text pair plus the intermediates needed for
/// backpropagation. Diagonal pairs use area fraction k, off-diagonal k_n.
struct ObjectRepresentation {
    int batch = 0;
    std::vector<Vec> reps;  // index i*B + j
    std::vector<Vec> probs; // softmax over pixels of S[i][j]
    std::vector<Mask> masks;

    const Vec& at(int i, int j) const { return reps[size_t(i) * batch + j]; }
    const Mask& mask(int i, int j) const { return masks[size_t(i) * batch + j]; }
    const Vec& prob(int i, int j) const { return probs[size_t(i) * batch + j]; }
};

ObjectRepresentation object_representations_batch(const BatchEmbeddings& batch, const SimilarityTensor& s,
                                                   double area_fraction, double neg_area_fraction);

/// Backpropagates dR[i][j] (index i*B + j) through the probability weighting
/// and the softmax; masks are treated as constants. Accumulates into dV and dS.
void object_representations_backward(const BatchEmbeddings& batch, const ObjectRepresentation& reps,
                                     const std::vector<Vec>& grad_reps, std::vector<Mat>& grad_v,
                                     SimilarityTensor& grad_s);

} // namespace mgca
