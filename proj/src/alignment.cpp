#include "mgca/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgca {

void BatchEmbeddings::validate() const {
    if (V.empty()) throw ShapeError("batch: empty");
    if (T.rows() != Eigen::Index(V.size())) throw ShapeError("batch: image and text counts differ");
    const auto L = V.front().rows();
    if (L == 0) throw ShapeError("batch: zero pixels");
    for (const auto& v : V) {
        if (v.rows() != L) throw ShapeError("batch: pixel count differs across images");
        if (v.cols() != T.cols()) throw ShapeError("batch: pixel and text dims differ");
        if (!v.allFinite()) throw NumericError("batch: non-finite pixel embedding");
    }
    if (!T.allFinite()) throw NumericError("batch: non-finite text embedding");
}

SimilarityTensor SimilarityTensor::zeros(int batch, int pixels) {
    SimilarityTensor s;
    s.per_image.assign(size_t(batch), Mat::Zero(pixels, batch));
    return s;
}

SimilarityTensor similarity(const BatchEmbeddings& batch) {
    batch.validate();
    SimilarityTensor s;
    s.per_image.reserve(batch.V.size());
    for (const auto& v : batch.V) s.per_image.push_back(v * batch.T.transpose());
    return s;
}

void similarity_backward(const BatchEmbeddings& batch, const SimilarityTensor& grad_s, std::vector<Mat>& grad_v,
                         Mat& grad_t) {
    for (int i = 0; i < batch.batch(); ++i) {
        grad_v[i].noalias() += grad_s.per_image[i] * batch.T;
        grad_t.noalias() += grad_s.per_image[i].transpose() * batch.V[i];
    }
}

Vec softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    Vec e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

Vec prob_map(const SimilarityTensor& s, int i, int j) {
    if (i < 0 || j < 0 || i >= s.batch() || j >= s.batch()) throw ShapeError("prob_map: index out of range");
    return softmax(s.row(i, j));
}

int mask_cardinality(int pixels, double area_fraction) {
    if (!(area_fraction > 0.0 && area_fraction <= 1.0))
        throw ConfigError("area fraction must lie in (0, 1], got " + std::to_string(area_fraction));
    // The small slack keeps exact products such as 0.4 * 5 from rounding up.
    int n = static_cast<int>(std::ceil(area_fraction * pixels - 1e-9));
    return std::clamp(n, 1, pixels);
}

Mask topk_mask(const Vec& prob, double area_fraction) {
    const int L = static_cast<int>(prob.size());
    const int n = mask_cardinality(L, area_fraction);
    std::vector<int> order(static_cast<size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](int a, int b) {
        if (prob[a] != prob[b]) return prob[a] > prob[b];
        return a < b;
    });
    Mask mask(size_t(L), 0);
    for (int k = 0; k < n; ++k) mask[size_t(order[size_t(k)])] = 1;
    return mask;
}

Vec object_representation(const Mat& pixels, const Vec& prob, const Mask& mask) {
    if (pixels.rows() != prob.size() || prob.size() != Eigen::Index(mask.size()))
        throw ShapeError("object_representation: shape mismatch");
    Vec out = Vec::Zero(pixels.cols());
    for (Eigen::Index p = 0; p < pixels.rows(); ++p)
        if (mask[size_t(p)]) out += prob[p] * pixels.row(p).transpose();
    return out;
}

ObjectRepresentation object_representations_batch(const BatchEmbeddings& batch, const SimilarityTensor& s,
                                                   double area_fraction, double neg_area_fraction) {
    mask_cardinality(1, area_fraction);
    mask_cardinality(1, neg_area_fraction);
    const int B = batch.batch();
    if (s.batch() != B || s.pixels() != batch.pixels()) throw ShapeError("object representations: S/V mismatch");
    ObjectRepresentation out;
    out.batch = B;
    out.reps.reserve(size_t(B) * B);
    out.probs.reserve(size_t(B) * B);
    out.masks.reserve(size_t(B) * B);
    for (int i = 0; i < B; ++i) {
        for (int j = 0; j < B; ++j) {
            Vec prob = prob_map(s, i, j);
            Mask mask = topk_mask(prob, i == j ? area_fraction : neg_area_fraction);
            out.reps.push_back(object_representation(batch.V[i], prob, mask));
            out.probs.push_back(std::move(prob));
            out.masks.push_back(std::move(mask));
        }
    }
    return out;
}

void object_representations_backward(const BatchEmbeddings& batch, const ObjectRepresentation& reps,
                                     const std::vector<Vec>& grad_reps, std::vector<Mat>& grad_v,
                                     SimilarityTensor& grad_s) {
    const int B = reps.batch;
    for (int i = 0; i < B; ++i) {
        const Mat& v = batch.V[i];
        for (int j = 0; j < B; ++j) {
            const Vec& g = grad_reps[size_t(i) * B + j];
            if (g.isZero(0.0)) continue;
            const Vec& prob = reps.prob(i, j);
            const Mask& mask = reps.mask(i, j);
            // d/dprob[p] = mask[p] * <V_i[p], g>
            Vec d_prob = Vec::Zero(prob.size());
            for (Eigen::Index p = 0; p < prob.size(); ++p) {
                if (!mask[size_t(p)]) continue;
                d_prob[p] = v.row(p).dot(g);
                grad_v[i].row(p) += prob[p] * g.transpose();
            }
            const double inner = prob.dot(d_prob);
            grad_s.per_image[i].col(j) += prob.cwiseProduct((d_prob.array() - inner).matrix());
        }
    }
}

} // namespace mgca
