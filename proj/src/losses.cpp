#include "mgca/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgca {

double TrainConfig::scale_for(int channels) const { return f > 0.0 ? f : 5.0 * std::sqrt(double(channels)); }

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
    if (!(tau > 0.0)) fail("loss.tau must be > 0");
    if (!(k > 0.0 && k <= 1.0)) fail("loss.k must lie in (0, 1]");
    if (!(k_n > 0.0 && k_n <= 1.0)) fail("loss.k_n must lie in (0, 1]");
    if (!(k_pix >= 0.0 && k_pix <= 1.0)) fail("loss.k_pix must lie in [0, 1]");
    if (!std::isfinite(f)) fail("loss.f must be finite");
    if (batch_size < 1) fail("train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) fail("train.lr must be >= 0");
    if (steps < 0) fail("train.steps must be >= 0");
    if (warmup_steps < 0) fail("train.warmup_steps must be >= 0");
    if (!(weight_decay >= 0.0)) fail("train.weight_decay must be >= 0");
}

double cosine(const Vec& x, const Vec& y) {
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 || ny == 0.0) throw NumericError("cosine: zero-norm vector");
    return x.dot(y) / (nx * ny);
}

namespace {

// Accumulates the gradient of g * cos(x, y) into dx, dy.
void cosine_backward(const Vec& x, const Vec& y, double g, Vec& dx, Vec& dy) {
    const double nx = x.norm();
    const double ny = y.norm();
    const double s = x.dot(y) / (nx * ny);
    dx += g * (y / (nx * ny) - s * x / (nx * nx));
    dy += g * (x / (nx * ny) - s * y / (ny * ny));
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const double m = row.maxCoeff();
    return m + std::log((row.array() - m).exp().sum());
}

// -1/B sum_i [log softmax(a_i)_i + log softmax(b_i)_i], with gradients.
double symmetric_nce(const Mat& a, const Mat& b, Mat* da, Mat* db) {
    const auto B = a.rows();
    double total = 0.0;
    if (da) *da = Mat::Zero(B, B);
    if (db) *db = Mat::Zero(B, B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double lse_a = log_sum_exp(a.row(i));
        const double lse_b = log_sum_exp(b.row(i));
        total += (a(i, i) - lse_a) + (b(i, i) - lse_b);
        if (da) {
            da->row(i) = (a.row(i).array() - lse_a).exp() / double(B);
            (*da)(i, i) -= 1.0 / double(B);
        }
        if (db) {
            db->row(i) = (b.row(i).array() - lse_b).exp() / double(B);
            (*db)(i, i) -= 1.0 / double(B);
        }
    }
    return -total / double(B);
}

RepresentationGrad zero_rep_grad(const ObjectRepresentation& reps, const Mat& texts) {
    RepresentationGrad g;
    g.reps.assign(reps.reps.size(), Vec::Zero(texts.cols()));
    g.texts = Mat::Zero(texts.rows(), texts.cols());
    return g;
}

void check_rep_inputs(const ObjectRepresentation& reps, const Mat& texts) {
    if (reps.batch < 1) throw ShapeError("loss: empty batch");
    if (texts.rows() != reps.batch) throw ShapeError("loss: representation/text batch mismatch");
}

void add_cos_grad(RepresentationGrad& g, const ObjectRepresentation& reps, const Mat& texts, int rep_i, int rep_j,
                  int text, double scale) {
    Vec dt = Vec::Zero(texts.cols());
    cosine_backward(reps.at(rep_i, rep_j), texts.row(text).transpose(), scale, g.reps[size_t(rep_i) * reps.batch + rep_j],
                    dt);
    g.texts.row(text) += dt.transpose();
}

} // namespace

double loss_object(const ObjectRepresentation& reps, const Mat& texts, double tau, RepresentationGrad* grad) {
    check_rep_inputs(reps, texts);
    const int B = reps.batch;
    Mat a(B, B), b(B, B);
    for (int i = 0; i < B; ++i) {
        for (int j = 0; j < B; ++j) {
            a(i, j) = cosine(reps.at(i, i), texts.row(j).transpose()) / tau;
            b(i, j) = cosine(texts.row(i).transpose(), reps.at(j, j)) / tau;
        }
    }
    Mat da, db;
    const double loss = symmetric_nce(a, b, grad ? &da : nullptr, grad ? &db : nullptr);
    if (grad) {
        *grad = zero_rep_grad(reps, texts);
        for (int i = 0; i < B; ++i) {
            for (int j = 0; j < B; ++j) {
                add_cos_grad(*grad, reps, texts, i, i, j, da(i, j) / tau);
                add_cos_grad(*grad, reps, texts, j, j, i, db(i, j) / tau);
            }
        }
    }
    return loss;
}

double loss_region(const ObjectRepresentation& reps, const Mat& texts, double tau, RepresentationGrad* grad) {
    check_rep_inputs(reps, texts);
    const int B = reps.batch;
    Mat a(B, B), b(B, B);
    for (int i = 0; i < B; ++i) {
        for (int j = 0; j < B; ++j) {
            a(i, j) = cosine(reps.at(i, j), texts.row(j).transpose()) / tau;
            b(i, j) = cosine(texts.row(i).transpose(), reps.at(j, i)) / tau;
        }
    }
    Mat da, db;
    const double loss = symmetric_nce(a, b, grad ? &da : nullptr, grad ? &db : nullptr);
    if (grad) {
        *grad = zero_rep_grad(reps, texts);
        for (int i = 0; i < B; ++i) {
            for (int j = 0; j < B; ++j) {
                add_cos_grad(*grad, reps, texts, i, j, j, da(i, j) / tau);
                add_cos_grad(*grad, reps, texts, j, i, i, db(i, j) / tau);
            }
        }
    }
    return loss;
}

int semi_hard_rank(int pixels, double k_pix) {
    if (!(k_pix >= 0.0 && k_pix <= 1.0)) throw ConfigError("k_pix must lie in [0, 1]");
    long r = std::lround(k_pix * pixels);
    return static_cast<int>(std::clamp<long>(r, 1, pixels));
}

PixelPairs mine_pixel_pairs(const SimilarityTensor& s, double k_pix, double f) {
    if (!(f > 0.0)) throw ConfigError("similarity scale f must be > 0");
    const int B = s.batch();
    const int L = s.pixels();
    PixelPairs out;
    out.rank = semi_hard_rank(L, k_pix);
    out.positive = Vec::Zero(B);
    out.negative = Mat::Zero(B, B);
    out.positive_index.assign(size_t(B), -1);
    out.negative_index.assign(size_t(B), std::vector<int>(size_t(B), -1));
    std::vector<int> order(static_cast<size_t>(L));
    for (int i = 0; i < B; ++i) {
        const Mat& si = s.per_image[i];
        std::iota(order.begin(), order.end(), 0);
        std::nth_element(order.begin(), order.begin() + (out.rank - 1), order.end(), [&](int a, int b) {
            if (si(a, i) != si(b, i)) return si(a, i) > si(b, i);
            return a < b;
        });
        const int pos = order[size_t(out.rank - 1)];
        out.positive_index[size_t(i)] = pos;
        out.positive[i] = si(pos, i) / f;
        for (int j = 0; j < B; ++j) {
            if (j == i) continue;
            Eigen::Index best = 0;
            si.col(j).maxCoeff(&best); // first maximum
            out.negative_index[size_t(i)][size_t(j)] = static_cast<int>(best);
            out.negative(i, j) = si(best, j) / f;
        }
    }
    return out;
}

double loss_pixel(const SimilarityTensor& s, double k_pix, double f, double tau, SimilarityTensor* grad_s) {
    const int B = s.batch();
    if (B < 1) throw ShapeError("loss_pixel: empty batch");
    PixelPairs pairs = mine_pixel_pairs(s, k_pix, f);
    Mat a(B, B), b(B, B);
    for (int i = 0; i < B; ++i) {
        for (int j = 0; j < B; ++j) {
            a(i, j) = (i == j ? pairs.positive[i] : pairs.negative(i, j)) / tau;
            b(i, j) = (i == j ? pairs.positive[i] : pairs.negative(j, i)) / tau;
        }
    }
    Mat da, db;
    const double loss = symmetric_nce(a, b, grad_s ? &da : nullptr, grad_s ? &db : nullptr);
    if (grad_s) {
        for (int i = 0; i < B; ++i) {
            const double g_pos = (da(i, i) + db(i, i)) / (tau * f);
            grad_s->per_image[i](pairs.positive_index[size_t(i)], i) += g_pos;
            for (int j = 0; j < B; ++j) {
                if (j == i) continue;
                const double g_neg = (da(i, j) + db(j, i)) / (tau * f);
                grad_s->per_image[i](pairs.negative_index[size_t(i)][size_t(j)], j) += g_neg;
            }
        }
    }
    return loss;
}

LossBreakdown loss_total(const BatchEmbeddings& batch, const TrainConfig& cfg, EmbeddingGrad* grad) {
    cfg.validate();
    batch.validate();
    const int B = batch.batch();
    const int L = batch.pixels();
    const double f = cfg.scale_for(batch.channels());
    LossBreakdown out;
    if (grad) {
        grad->V.assign(size_t(B), Mat::Zero(L, batch.channels()));
        grad->T = Mat::Zero(B, batch.channels());
    }
    if (!cfg.use_obj && !cfg.use_reg && !cfg.use_pix) return out;

    const SimilarityTensor s = similarity(batch);
    SimilarityTensor grad_s;
    if (grad) grad_s = SimilarityTensor::zeros(B, L);

    if (cfg.use_obj || cfg.use_reg) {
        const ObjectRepresentation reps = object_representations_batch(batch, s, cfg.k, cfg.k_n);
        std::vector<Vec> grad_reps;
        if (grad) grad_reps.assign(reps.reps.size(), Vec::Zero(batch.channels()));
        auto absorb = [&](const RepresentationGrad& g) {
            for (size_t n = 0; n < grad_reps.size(); ++n) grad_reps[n] += g.reps[n];
            grad->T += g.texts;
        };
        if (cfg.use_obj) {
            RepresentationGrad g;
            out.obj = loss_object(reps, batch.T, cfg.tau, grad ? &g : nullptr);
            if (!std::isfinite(out.obj)) throw NumericError("non-finite object-level loss");
            if (grad) absorb(g);
        }
        if (cfg.use_reg) {
            RepresentationGrad g;
            out.reg = loss_region(reps, batch.T, cfg.tau, grad ? &g : nullptr);
            if (!std::isfinite(out.reg)) throw NumericError("non-finite region-level loss");
            if (grad) absorb(g);
        }
        if (grad) object_representations_backward(batch, reps, grad_reps, grad->V, grad_s);
    }
    if (cfg.use_pix) {
        out.pix = loss_pixel(s, cfg.k_pix, f, cfg.tau, grad ? &grad_s : nullptr);
        if (!std::isfinite(out.pix)) throw NumericError("non-finite pixel-level loss");
    }
    if (grad) similarity_backward(batch, grad_s, grad->V, grad->T);
    out.total = out.obj + out.reg + out.pix;
    return out;
}

} // namespace mgca
