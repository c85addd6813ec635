// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.

#include "oracles.hpp"

#include "mgca/config.hpp"
#include "mgca/gradcheck.hpp"
#include "mgca/netpbm.hpp"
#include "mgca/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <algorithm>

using namespace mgca;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::string detail;
};

void report(int id, const std::string& name, const Verdict& v) {
    std::printf("criterion %d %-28s %s  %s\n", id, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- 1: oracle equivalence ------------------------------------------------

BatchEmbeddings to_batch(const oracle::Vec3& V, const oracle::Vec2& T) {
    BatchEmbeddings b;
    for (const auto& vi : V) {
        Mat m(Eigen::Index(vi.size()), Eigen::Index(vi[0].size()));
        for (size_t p = 0; p < vi.size(); ++p)
            for (size_t c = 0; c < vi[p].size(); ++c) m(Eigen::Index(p), Eigen::Index(c)) = vi[p][c];
        b.V.push_back(m);
    }
    b.T = Mat(Eigen::Index(T.size()), Eigen::Index(T[0].size()));
    for (size_t j = 0; j < T.size(); ++j)
        for (size_t c = 0; c < T[j].size(); ++c) b.T(Eigen::Index(j), Eigen::Index(c)) = T[j][c];
    return b;
}

Verdict oracle_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> frac(0.05, 1.0);
    double worst = 0.0;
    int mismatched_masks = 0, mismatched_index = 0;
    const int instances = 200;
    for (int n = 0; n < instances; ++n) {
        const size_t B = 1 + rng() % 3, L = 1 + rng() % 8, C = 1 + rng() % 4;
        auto V = oracle::random_v(rng, B, L, C);
        auto T = oracle::random_t(rng, B, C);
        TrainConfig cfg;
        cfg.k = frac(rng);
        cfg.k_n = frac(rng);
        cfg.k_pix = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double f = cfg.scale_for(int(C));
        auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };

        BatchEmbeddings batch = to_batch(V, T);
        SimilarityTensor s = similarity(batch);
        auto S = oracle::similarity(V, T);
        for (size_t i = 0; i < B; ++i)
            for (size_t j = 0; j < B; ++j) {
                for (size_t p = 0; p < L; ++p) track(s.at(int(i), int(j), int(p)), S[i][j][p]);
                Vec prob = prob_map(s, int(i), int(j));
                auto ref = oracle::softmax(S[i][j]);
                for (size_t p = 0; p < L; ++p) track(prob[Eigen::Index(p)], ref[p]);
            }

        ObjectRepresentation reps = object_representations_batch(batch, s, cfg.k, cfg.k_n);
        auto R = oracle::reps(V, S, cfg.k, cfg.k_n);
        for (size_t i = 0; i < B; ++i)
            for (size_t j = 0; j < B; ++j) {
                auto ref_mask = oracle::topk(oracle::softmax(S[i][j]), i == j ? cfg.k : cfg.k_n);
                const Mask& m = reps.mask(int(i), int(j));
                for (size_t p = 0; p < L; ++p) mismatched_masks += int(m[p]) != ref_mask[p];
                for (size_t c = 0; c < C; ++c) track(reps.at(int(i), int(j))[Eigen::Index(c)], R[i][j][c]);
            }

        PixelPairs pairs = mine_pixel_pairs(s, cfg.k_pix, f);
        auto mined = oracle::mine(S, cfg.k_pix, f);
        mismatched_index += pairs.rank != mined.rank;
        for (size_t i = 0; i < B; ++i) {
            mismatched_index += pairs.positive_index[i] != mined.plus_index[i];
            track(pairs.positive[Eigen::Index(i)], mined.plus[i]);
            for (size_t j = 0; j < B; ++j)
                if (i != j) track(pairs.negative(Eigen::Index(i), Eigen::Index(j)), mined.minus[i][j]);
        }

        bool degenerate = false; // zero-norm representation (every cosine needs nonzero norms)
        for (const auto& r : reps.reps) degenerate = degenerate || r.norm() == 0.0;
        if (!degenerate) {
            track(loss_object(reps, batch.T, cfg.tau), oracle::loss_object(R, T, cfg.tau));
            track(loss_region(reps, batch.T, cfg.tau), oracle::loss_region(R, T, cfg.tau));
        }
        track(loss_pixel(s, cfg.k_pix, f, cfg.tau), oracle::loss_pixel(S, cfg.k_pix, f, cfg.tau));
    }
    const double elapsed = seconds_since(t0);
    Verdict v;
    v.pass = worst <= 1e-6 && mismatched_masks == 0 && mismatched_index == 0 && elapsed < 30.0;
    v.detail = std::to_string(instances) + " instances, max |diff| " + fmt("%.2e", worst) + ", mask mismatches " +
               std::to_string(mismatched_masks) + ", index mismatches " + std::to_string(mismatched_index) + ", " +
               fmt("%.2f s", elapsed) + " (limits 1e-6, 0, 0, 30 s)";
    return v;
}

// ---- 2: gradient checks -----------------------------------------------------

Verdict gradient_checks() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    bool pass = true;
    int checked = 0;
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        GradCheckOptions o;
        o.seed = seed;
        GradCheckReport r = run_gradcheck(o);
        pass = pass && r.pass && r.entries.size() == 4;
        for (const auto& e : r.entries) {
            worst = std::max({worst, e.err_v, e.err_t, e.err_decoder});
            ++checked;
        }
    }
    const double elapsed = seconds_since(t0);
    Verdict v;
    v.pass = pass && worst <= 1e-3 && elapsed < 120.0;
    v.detail = std::to_string(checked) + " loss/instance pairs (obj, reg, pix, total) over V, T, decoder; B=2 L=16 C=8; "
               "max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", elapsed) + " (limits 1e-3, 120 s)";
    return v;
}

// ---- 3: closed forms ----------------------------------------------------------

Verdict closed_forms() {
    const double expected = 2.0 * std::log(1.0 + std::exp(-1.0));
    Mat T = Mat::Identity(2, 2);
    ObjectRepresentation reps;
    reps.batch = 2;
    reps.reps = {Vec::Unit(2, 0), Vec::Unit(2, 1), Vec::Unit(2, 0), Vec::Unit(2, 1)};
    const double obj = loss_object(reps, T, 1.0);

    SimilarityTensor s = SimilarityTensor::zeros(2, 1); // L = 1: S+ = [1, 1], S- = 0
    s.per_image[0](0, 0) = 1.0;
    s.per_image[1](0, 1) = 1.0;
    const double pix = loss_pixel(s, 0.06, 1.0, 1.0);

    std::mt19937_64 rng(3);
    bool zero = true;
    for (int n = 0; n < 10; ++n) {
        BatchEmbeddings b = to_batch(oracle::random_v(rng, 1, 16, 8), oracle::random_t(rng, 1, 8));
        LossBreakdown l = loss_total(b, TrainConfig{});
        zero = zero && l.obj == 0.0 && l.reg == 0.0 && l.pix == 0.0 && l.total == 0.0;
    }
    Verdict v;
    v.pass = std::abs(obj - expected) <= 1e-4 && std::abs(pix - expected) <= 1e-4 && zero;
    v.detail = "L_obj " + fmt("%.6f", obj) + ", L_pix " + fmt("%.6f", pix) + " vs " + fmt("%.6f", expected) +
               " (tol 1e-4); B=1 all losses exactly 0: " + (zero ? "yes" : "no");
    return v;
}

// ---- 4: degenerate units --------------------------------------------------------

Verdict degenerate_units() {
    int images = 0, differing = 0;
    auto compare = [&](const Image& im, const FrozenImageEncoder& enc, const Decoder& dec, const ClassVocabulary& vocab,
                       InferenceConfig cfg) {
        const int side = cfg.window / enc.patch_size() * dec.upscale();
        cfg.pixel_unit = true;
        LabelMap a = segment_image(im, enc, dec, vocab, cfg).labels;
        cfg.pixel_unit = false;
        cfg.meta_points = side * side;
        LabelMap b = segment_image(im, enc, dec, vocab, cfg).labels;
        ++images;
        differing += a.data != b.data;
    };
    {   // toy geometry: L = 64 per window
        SyntheticConfig sc;
        sc.n_samples = 20;
        ModelConfig mc;
        Model model(mc);
        std::vector<std::string> names;
        for (const auto& c : sc.concepts) names.push_back(c.name());
        ClassVocabulary vocab = build_vocabulary(names, default_prompt_templates(), *model.text_encoder);
        InferenceConfig cfg;
        cfg.short_side = 128;
        cfg.window = 64;
        cfg.stride = 32;
        for (const auto& s : gen_synthetic(sc)) compare(s.image, *model.image_encoder, model.decoder, vocab, cfg);
    }
    {   // paper geometry: 224 windows, L = 784 per window
        auto enc = toy_image_encoder(0, 16, 16);
        auto txt = toy_text_encoder(1, 16);
        Decoder dec(16, 2);
        ClassVocabulary vocab = build_vocabulary({"red circle", "green square", "blue triangle", "sky"},
                                                 default_prompt_templates(), *txt);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int n = 0; n < 2; ++n) {
            Image im(336, 448);
            for (auto& v : im.data) v = u(rng);
            compare(im, *enc, dec, vocab, InferenceConfig{});
        }
        // one 448 window: L = 56 x 56 = 3136
        Image im(448, 448);
        for (auto& v : im.data) v = u(rng);
        InferenceConfig whole;
        whole.window = whole.stride = 448;
        compare(im, *enc, dec, vocab, whole);
    }
    Verdict v;
    v.pass = differing == 0;
    v.detail = std::to_string(images) + " images, meta-points = L vs pixel unit, " + std::to_string(differing) +
               " with differing label bytes";
    return v;
}

// ---- 5, 6: toy training -------------------------------------------------------------

struct ToyRun {
    double untrained = NAN;
    double units = NAN;
    double pixel = NAN;
    double seconds = 0.0;
};

RunConfig toy_config(std::uint64_t seed, bool obj, bool reg, bool pix) {
    Config c;
    c.set("train.seed", std::to_string(seed));
    c.set("model.decoder_seed", std::to_string(seed + 1));
    c.set("loss.obj", obj ? "true" : "false");
    c.set("loss.reg", reg ? "true" : "false");
    c.set("loss.pix", pix ? "true" : "false");
    return RunConfig::from(c);
}

ToyRun toy_run(const Dataset& data, const RunConfig& run, bool with_baselines) {
    const auto t0 = Clock::now();
    ToyRun out;
    Model model(run.model);
    InferenceConfig pixel = run.inference;
    pixel.pixel_unit = true;
    if (with_baselines) out.untrained = evaluate(data, model, run.inference, BackgroundMode::Ignore).report.mean;
    Trainer(data, model, run.train, run.train_seed).run();
    out.units = evaluate(data, model, run.inference, BackgroundMode::Ignore).report.mean;
    if (with_baselines) out.pixel = evaluate(data, model, pixel, BackgroundMode::Ignore).report.mean;
    out.seconds = seconds_since(t0);
    return out;
}

Verdict toy_training(const ToyRun& r) {
    Verdict v;
    const double gain = 100.0 * (r.units - r.untrained);
    v.pass = gain >= 20.0 && r.units >= r.pixel && r.seconds < 900.0;
    v.detail = "fg mIoU untrained " + fmt("%.2f", 100 * r.untrained) + " -> trained " + fmt("%.2f", 100 * r.units) +
               " (gain " + fmt("%.2f", gain) + ", need >= 20); 36 units " + fmt("%.2f", 100 * r.units) +
               " vs pixel unit " + fmt("%.2f", 100 * r.pixel) + "; " + fmt("%.0f s", r.seconds) + " (limit 900 s)";
    return v;
}

// ---- 7: mining knob --------------------------------------------------------------------

Verdict mining_knob(const Dataset& data) {
    Verdict v;
    v.detail = "L=64:";
    for (double k_pix : {0.0, 0.06, 1.0}) {
        RunConfig run = toy_config(0, true, true, true);
        run.train.k_pix = k_pix;
        run.train.steps = 200;
        run.train.warmup_steps = 20;
        Model model(run.model);
        bool finite = true;
        try {
            for (const auto& s : Trainer(data, model, run.train, run.train_seed).run())
                finite = finite && std::isfinite(s.loss.total);
        } catch (const NumericError&) {
            finite = false;
        }
        // Selection on the trained model's embeddings of the first batch-sized slice.
        BatchEmbeddings batch;
        const int B = 8;
        for (int b = 0; b < B; ++b) {
            const auto& rec = data.records[size_t(b)];
            batch.V.push_back(model.decoder.decode(model.image_encoder->encode_image(rec.image)).values);
        }
        batch.T = Mat(B, run.model.channels);
        for (int b = 0; b < B; ++b) batch.T.row(b) = model.text_encoder->encode_text(data.records[size_t(b)].caption).transpose();
        const int L = batch.pixels();
        const double f = run.train.scale_for(run.model.channels);
        PixelPairs pairs = mine_pixel_pairs(similarity(batch), k_pix, f);
        const int expected = k_pix == 0.0 ? 1 : k_pix == 1.0 ? L : int(std::lround(0.06 * L));
        bool idx_ok = true;
        for (int i = 0; i < B; ++i) {
            Vec diag = similarity(batch).row(i, i);
            std::vector<double> d(diag.data(), diag.data() + diag.size());
            auto order = oracle::order_desc(d);
            idx_ok = idx_ok && pairs.positive_index[size_t(i)] == order[size_t(expected - 1)];
        }
        const bool ok = finite && pairs.rank == expected && idx_ok;
        v.pass = v.pass && ok;
        v.detail += " k_pix=" + fmt("%.2f", k_pix) + " r=" + std::to_string(pairs.rank) + "/" + std::to_string(expected) +
                    (finite ? " finite" : " NON-FINITE") + (idx_ok ? " idx-ok" : " idx-MISMATCH") + ";";
    }
    return v;
}

// ---- 8: determinism -------------------------------------------------------------------------

std::string mask_bytes(const std::vector<LabelMap>& masks, const fs::path& dir) {
    std::string all;
    for (size_t i = 0; i < masks.size(); ++i) {
        const fs::path p = dir / (std::to_string(i) + ".pgm");
        write_pgm(p, masks[i]);
        std::ifstream f(p, std::ios::binary);
        all += std::string(std::istreambuf_iterator<char>(f), {});
    }
    return all;
}

Verdict determinism(const Dataset& data) {
    const fs::path dir = fs::temp_directory_path() / "mgca_acceptance";
    fs::remove_all(dir);
    std::vector<double> loss;
    std::vector<std::string> bytes;
    for (int rep = 0; rep < 2; ++rep) {
        RunConfig run = toy_config(0, true, true, true);
        run.train.steps = 11;
        Model model(run.model);
        auto log = Trainer(data, model, run.train, run.train_seed).run();
        loss.push_back(log[10].loss.total);
        Dataset slice = data;
        slice.records.resize(20);
        EvalResult r = evaluate(slice, model, run.inference, BackgroundMode::Threshold, 0.5, true);
        fs::create_directories(dir / std::to_string(rep));
        bytes.push_back(mask_bytes(r.predictions, dir / std::to_string(rep)));
    }
    Verdict v;
    const double diff = std::abs(loss[0] - loss[1]);
    v.pass = diff <= 1e-5 && bytes[0] == bytes[1] && !bytes[0].empty();
    v.detail = "step-10 loss " + fmt("%.8f", loss[0]) + " vs " + fmt("%.8f", loss[1]) + " (|diff| " + fmt("%.1e", diff) +
               ", tol 1e-5); 20 mask files " + (bytes[0] == bytes[1] ? "byte-identical" : "DIFFER");
    fs::remove_all(dir);
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> selected;
    app.add_option("--only", selected, "Run only these criteria (1-8)");
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int id) { return selected.empty() || std::find(selected.begin(), selected.end(), id) != selected.end(); };

    bool all = true;
    auto done = [&](int id, const std::string& name, const Verdict& v) {
        report(id, name, v);
        all = all && v.pass;
    };
    if (wanted(1)) done(1, "oracle-equivalence", oracle_equivalence());
    if (wanted(2)) done(2, "gradient-checks", gradient_checks());
    if (wanted(3)) done(3, "closed-form-values", closed_forms());
    if (wanted(4)) done(4, "degenerate-unit-equivalence", degenerate_units());

    if (wanted(5) || wanted(6) || wanted(7) || wanted(8)) {
        const RunConfig base = toy_config(0, true, true, true);
        const Dataset data = to_dataset(gen_synthetic(base.data), base.data.concepts);
        std::map<int, ToyRun> full; // by seed
        if (wanted(5) || wanted(6)) {
            full[0] = toy_run(data, base, true);
            if (wanted(5)) done(5, "toy-end-to-end-training", toy_training(full[0]));
        }
        if (wanted(6)) {
            Verdict v;
            double mean[3] = {0, 0, 0};
            const char* names[3] = {"obj", "obj+reg", "obj+reg+pix"};
            for (std::uint64_t seed : {0u, 1u, 2u}) {
                const double obj = toy_run(data, toy_config(seed, true, false, false), false).units;
                const double reg = toy_run(data, toy_config(seed, true, true, false), false).units;
                const double allv = seed == 0 ? full[0].units : toy_run(data, toy_config(seed, true, true, true), false).units;
                const bool ok = 100 * (allv - reg) >= -1.0 && 100 * (reg - obj) >= -1.0;
                v.pass = v.pass && ok;
                v.detail += "seed " + std::to_string(seed) + ": " + fmt("%.2f", 100 * obj) + " <= " +
                            fmt("%.2f", 100 * reg) + " <= " + fmt("%.2f", 100 * allv) + (ok ? "; " : " (violated); ");
                mean[0] += obj / 3;
                mean[1] += reg / 3;
                mean[2] += allv / 3;
            }
            v.detail += "mean";
            for (int k = 0; k < 3; ++k) v.detail += std::string(" ") + names[k] + " " + fmt("%.2f", 100 * mean[k]);
            v.detail += " (per-seed gaps >= -1 point)";
            done(6, "ablation-ordering", v);
        }
        if (wanted(7)) done(7, "mining-knob", mining_knob(data));
        if (wanted(8)) done(8, "determinism", determinism(data));
    }
    std::printf("acceptance: %s\n", all ? "PASS" : "FAIL");
    return all ? 0 : 1;
}
