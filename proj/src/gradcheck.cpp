#include "mgca/gradcheck.hpp"

#include "mgca/decoder.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

namespace mgca {

double relative_error(const Eigen::Ref<const Eigen::VectorXd>& analytic, const Eigen::Ref<const Eigen::VectorXd>& numeric) {
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
    return (analytic - numeric).norm() / denom;
}

namespace {

struct Instance {
    Decoder decoder;
    std::vector<Mat> upsampled; // decoder block inputs
    Mat texts;
    int rows = 0;
    int cols = 0;
};

Instance make_instance(const GradCheckOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Instance inst{Decoder(o.channels, o.seed + 1), {}, Mat(o.batch, o.channels), 0, 0};
    for (int b = 0; b < o.batch; ++b) {
        FeatureGrid g;
        g.rows = g.cols = o.grid;
        g.values = Mat(o.grid * o.grid, o.channels);
        for (Eigen::Index i = 0; i < g.values.size(); ++i) g.values.data()[i] = normal(rng);
        FeatureGrid up = inst.decoder.upsample(g);
        inst.rows = up.rows;
        inst.cols = up.cols;
        inst.upsampled.push_back(std::move(up.values));
    }
    for (Eigen::Index i = 0; i < inst.texts.size(); ++i) inst.texts.data()[i] = normal(rng);
    return inst;
}

BatchEmbeddings decode_batch(const Instance& inst) {
    BatchEmbeddings batch;
    for (const auto& u : inst.upsampled) batch.V.push_back(inst.decoder.forward_blocks(u, 1, inst.rows, inst.cols));
    batch.T = inst.texts;
    return batch;
}

GradCheckEntry check_one(const std::string& name, const TrainConfig& cfg, const GradCheckOptions& o, Instance& inst) {
    const BatchEmbeddings base = decode_batch(inst);
    EmbeddingGrad grad;
    loss_total(base, cfg, &grad);
    if (o.corrupt) {
        for (auto& g : grad.V) g *= 1.5;
        grad.T *= 1.5;
    }
    const double h = o.step;
    auto total = [&](const BatchEmbeddings& b) { return loss_total(b, cfg).total; };

    GradCheckEntry e;
    e.loss = name;

    // V and T as free inputs.
    {
        std::vector<double> analytic, numeric;
        BatchEmbeddings b = base;
        for (size_t i = 0; i < b.V.size(); ++i) {
            for (Eigen::Index k = 0; k < b.V[i].size(); ++k) {
                double& x = b.V[i].data()[k];
                const double x0 = x;
                x = x0 + h;
                const double up = total(b);
                x = x0 - h;
                const double dn = total(b);
                x = x0;
                numeric.push_back((up - dn) / (2 * h));
                analytic.push_back(grad.V[i].data()[k]);
            }
        }
        e.err_v = relative_error(Eigen::Map<Vec>(analytic.data(), Eigen::Index(analytic.size())),
                                 Eigen::Map<Vec>(numeric.data(), Eigen::Index(numeric.size())));
    }
    {
        std::vector<double> analytic, numeric;
        BatchEmbeddings b = base;
        for (Eigen::Index k = 0; k < b.T.size(); ++k) {
            double& x = b.T.data()[k];
            const double x0 = x;
            x = x0 + h;
            const double up = total(b);
            x = x0 - h;
            const double dn = total(b);
            x = x0;
            numeric.push_back((up - dn) / (2 * h));
            analytic.push_back(grad.T.data()[k]);
        }
        e.err_t = relative_error(Eigen::Map<Vec>(analytic.data(), Eigen::Index(analytic.size())),
                                 Eigen::Map<Vec>(numeric.data(), Eigen::Index(numeric.size())));
    }
    // Decoder parameters, backpropagated through the blocks.
    {
        std::vector<Mat> param_grads = inst.decoder.zero_gradients();
        for (size_t i = 0; i < inst.upsampled.size(); ++i) {
            Decoder::Trace trace;
            inst.decoder.forward_blocks(inst.upsampled[i], 1, inst.rows, inst.cols, &trace);
            inst.decoder.backward_blocks(trace, grad.V[i], param_grads);
        }
        std::vector<double> analytic, numeric;
        auto& params = inst.decoder.parameters();
        for (size_t pi = 0; pi < params.size(); ++pi) {
            for (Eigen::Index k = 0; k < params[pi].value.size(); ++k) {
                double& x = params[pi].value.data()[k];
                const double x0 = x;
                x = x0 + h;
                const double up = total(decode_batch(inst));
                x = x0 - h;
                const double dn = total(decode_batch(inst));
                x = x0;
                numeric.push_back((up - dn) / (2 * h));
                analytic.push_back(param_grads[pi].data()[k]);
            }
        }
        e.err_decoder = relative_error(Eigen::Map<Vec>(analytic.data(), Eigen::Index(analytic.size())),
                                       Eigen::Map<Vec>(numeric.data(), Eigen::Index(numeric.size())));
    }
    e.pass = e.err_v <= o.tolerance && e.err_t <= o.tolerance && e.err_decoder <= o.tolerance;
    return e;
}

} // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& o) {
    GradCheckReport report;
    Instance inst = make_instance(o);
    auto only = [&](bool obj, bool reg, bool pix) {
        TrainConfig c = o.loss;
        c.use_obj = obj;
        c.use_reg = reg;
        c.use_pix = pix;
        return c;
    };
    if (o.loss.use_obj) report.entries.push_back(check_one("obj", only(true, false, false), o, inst));
    if (o.loss.use_reg) report.entries.push_back(check_one("reg", only(false, true, false), o, inst));
    if (o.loss.use_pix) report.entries.push_back(check_one("pix", only(false, false, true), o, inst));
    if (o.loss.use_obj || o.loss.use_reg || o.loss.use_pix) report.entries.push_back(check_one("total", o.loss, o, inst));
    for (const auto& e : report.entries) report.pass = report.pass && e.pass;
    return report;
}

std::string GradCheckReport::to_text() const {
    std::string out = "loss     err(V)       err(T)       err(decoder)  result\n";
    char buf[160];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%-7s  %.3e    %.3e    %.3e     %s\n", e.loss.c_str(), e.err_v, e.err_t,
                      e.err_decoder, e.pass ? "PASS" : "FAIL");
        out += buf;
    }
    out += pass ? "grad-check: PASS\n" : "grad-check: FAIL\n";
    return out;
}

} // namespace mgca
