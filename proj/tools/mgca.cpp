#include "mgca/config.hpp"
#include "mgca/data.hpp"
#include "mgca/gradcheck.hpp"
#include "mgca/inference.hpp"
#include "mgca/metrics.hpp"
#include "mgca/netpbm.hpp"
#include "mgca/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace mgca;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kConfig = 2, kData = 3, kNumeric = 4, kIo = 5 };

fs::path output_root() {
    const char* env = std::getenv("MGCA_OUTPUT_ROOT");
    return env && *env ? fs::path(env) : fs::current_path();
}

fs::path resolve_output(const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : output_root() / path;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("short write to " + path.string());
}

Config load_config(const std::string& file, const std::vector<std::string>& overrides) {
    Config c = file.empty() ? Config{} : Config::load(file);
    for (const auto& o : overrides) c.apply_override(o);
    return c;
}

Dataset load_or_generate(const RunConfig& run) {
    if (!run.data_path.empty()) return read_dataset(run.data_path);
    return to_dataset(gen_synthetic(run.data), run.data.concepts);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

bool has_masks(const Dataset& ds) {
    for (const auto& r : ds.records)
        if (!r.mask.data.empty()) return true;
    return false;
}

int window_pixels(const RunConfig& run) {
    const int side = run.inference.window / run.model.patch_size * 2;
    return side * side;
}

std::string unit_label(const RunConfig& run) {
    if (run.inference.pixel_unit || run.inference.meta_points == window_pixels(run)) return "pixel unit";
    return std::to_string(run.inference.meta_points) + " semantic units";
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "run";
    bool evaluate = true;
};

int cmd_train(const TrainArgs& a) {
    const RunConfig run = RunConfig::from(load_config(a.config, a.overrides));
    const fs::path dir = resolve_output(a.out);
    fs::create_directories(dir);
    write_text(dir / "config.txt", run.echo().to_text());

    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = load_or_generate(run);
    Model model(run.model);
    const auto image_digest = model.image_encoder->parameter_digest();
    const auto text_digest = model.text_encoder->parameter_digest();

    std::ofstream log(dir / "loss_log.csv");
    if (!log) throw IoError("cannot write " + (dir / "loss_log.csv").string());
    log << "step,lr,total,obj,reg,pix\n";
    std::vector<std::string> checkpoints;
    Trainer trainer(data, model, run.train, run.train_seed);
    trainer.run([&](const StepLog& s) {
        log << s.step << ',' << fmt(s.lr) << ',' << fmt(s.loss.total) << ',' << fmt(s.loss.obj) << ','
            << fmt(s.loss.reg) << ',' << fmt(s.loss.pix) << '\n';
        if (run.log_every > 0 && (s.step % run.log_every == 0 || s.step + 1 == run.train.steps))
            std::printf("step %5d  lr %.3e  total %.4f  obj %.4f  reg %.4f  pix %.4f\n", s.step, s.lr,
                        s.loss.total, s.loss.obj, s.loss.reg, s.loss.pix);
        const int done = s.step + 1;
        if (run.checkpoint_every > 0 && done % run.checkpoint_every == 0 && done != run.train.steps) {
            char name[48];
            std::snprintf(name, sizeof name, "checkpoint_%06d.mgca", done);
            save_checkpoint(dir / name, model, run);
            checkpoints.push_back(name);
        }
    });
    log.close();
    save_checkpoint(dir / "final.mgca", model, run);
    checkpoints.push_back("final.mgca");

    if (model.image_encoder->parameter_digest() != image_digest || model.text_encoder->parameter_digest() != text_digest)
        throw NumericError("frozen encoder parameters changed during training");

    std::ostringstream m;
    m << "command=train\n"
      << "config=config.txt\n"
      << "loss_log=loss_log.csv\n"
      << "seed.data=" << run.data.seed << "\n"
      << "seed.train=" << run.train_seed << "\n"
      << "seed.encoder=" << run.model.encoder_seed << "\n"
      << "seed.decoder=" << run.model.decoder_seed << "\n"
      << "records=" << data.records.size() << "\n"
      << "steps=" << trainer.steps_done() << "\n"
      << "decoder.parameter_count=" << model.decoder.parameter_count() << "\n";
    for (size_t i = 0; i < checkpoints.size(); ++i) m << "checkpoint." << i << "=" << checkpoints[i] << "\n";
    if (a.evaluate && has_masks(data)) {
        EvalResult r = evaluate(data, model, run.inference,
                                run.background ? BackgroundMode::Threshold : BackgroundMode::Ignore, run.threshold);
        std::vector<std::string> names = data.classes;
        std::printf("%s", format_report_table(r.report, names).c_str());
        std::istringstream kv(format_report_kv(r.report, names));
        for (std::string line; std::getline(kv, line);) m << "final." << line << "\n";
    }
    m << "wall_clock_seconds=" << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())
      << "\n";
    write_text(dir / "manifest.txt", m.str());
    std::printf("run written to %s\n", dir.string().c_str());
    return kOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::vector<std::string> overrides;
    std::optional<int> meta_points;
    bool pixel_unit = false;
    bool background = false;
    std::optional<double> threshold;
    std::string out;
    std::string masks;
};

int cmd_evaluate(const EvalArgs& a) {
    LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
    Config c = ck.run.echo();
    for (const auto& o : a.overrides) c.apply_override(o);
    if (!a.data.empty()) c.set("data.path", a.data);
    if (a.meta_points) c.set("inference.meta_points", std::to_string(*a.meta_points));
    if (a.pixel_unit) c.set("inference.pixel_unit", "true");
    if (a.background) c.set("inference.background", "true");
    if (a.threshold) c.set("inference.threshold", fmt(*a.threshold));
    const RunConfig run = RunConfig::from(c);

    const Dataset data = load_or_generate(run);
    if (!has_masks(data)) throw DataError("evaluation set has no masks");
    const BackgroundMode mode = run.background ? BackgroundMode::Threshold : BackgroundMode::Ignore;
    EvalResult r = evaluate(data, *ck.model, run.inference, mode, run.threshold, !a.masks.empty());

    const std::string label = unit_label(run);
    std::string table = "inference: " + label + "\n" + format_report_table(r.report, data.classes);
    std::string kv = "inference=" + label + "\n" + format_report_kv(r.report, data.classes);
    std::printf("%s", table.c_str());
    if (!a.out.empty()) {
        const fs::path dir = resolve_output(a.out);
        write_text(dir / "metrics.txt", table);
        write_text(dir / "metrics.kv", kv);
    }
    if (!a.masks.empty()) {
        const fs::path dir = resolve_output(a.masks);
        fs::create_directories(dir);
        for (size_t i = 0, k = 0; i < data.records.size(); ++i)
            if (!data.records[i].mask.data.empty()) write_pgm(dir / (data.records[i].id + ".pgm"), r.predictions[k++]);
    }
    return kOk;
}

// ---- segment -------------------------------------------------------------

struct SegmentArgs {
    std::string checkpoint;
    std::string image;
    std::string classes;
    std::string classes_file;
    bool background = false;
    std::optional<double> threshold;
    std::optional<int> meta_points;
    bool pixel_unit = false;
    std::string out = "mask.pgm";
};

std::vector<std::string> parse_classes(const SegmentArgs& a) {
    std::vector<std::string> names;
    auto push = [&](std::string s) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
        while (!s.empty() && s.front() == ' ') s.erase(0, 1);
        if (!s.empty()) names.push_back(s);
    };
    if (!a.classes_file.empty()) {
        std::ifstream f(a.classes_file);
        if (!f) throw IoError("cannot read " + a.classes_file);
        for (std::string line; std::getline(f, line);) push(line);
    }
    std::istringstream in(a.classes);
    for (std::string item; std::getline(in, item, ',');) push(item);
    if (names.empty()) throw ConfigError("segment: no class names given");
    return names;
}

int cmd_segment(const SegmentArgs& a) {
    LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
    InferenceConfig icfg = ck.run.inference;
    if (a.meta_points) icfg.meta_points = *a.meta_points;
    if (a.pixel_unit) icfg.pixel_unit = true;
    const double threshold = a.threshold.value_or(ck.run.threshold);
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    const std::vector<std::string> names = parse_classes(a);
    const Image image = read_ppm(a.image);
    ClassVocabulary vocab =
        build_vocabulary(names, default_prompt_templates(), *ck.model->text_encoder, a.background, threshold);
    SegmentationResult r = segment_image(image, *ck.model->image_encoder, ck.model->decoder, vocab, icfg);

    const fs::path out = resolve_output(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_pgm(out, r.labels);
    std::ostringstream manifest;
    for (size_t k = 0; k < names.size(); ++k) manifest << k << ' ' << names[k] << '\n';
    if (a.background) manifest << names.size() << " background\n";
    write_text(fs::path(out.string() + ".classes.txt"), manifest.str());
    std::printf("mask written to %s (%d windows)\n", out.string().c_str(), r.windows);
    return kOk;
}

// ---- gen-data ------------------------------------------------------------

struct GenArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "data";
};

int cmd_gen_data(const GenArgs& a) {
    const RunConfig run = RunConfig::from(load_config(a.config, a.overrides));
    const fs::path dir = resolve_output(a.out);
    auto samples = gen_synthetic(run.data);
    write_dataset(dir, samples, run.data.concepts);
    std::printf("%zu samples written to %s\n", samples.size(), dir.string().c_str());
    return kOk;
}

// ---- grad-check ----------------------------------------------------------

struct GradArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::uint64_t seed = 7;
    bool corrupt = false;
};

int cmd_grad_check(const GradArgs& a) {
    const RunConfig run = RunConfig::from(load_config(a.config, a.overrides));
    GradCheckOptions o;
    o.seed = a.seed;
    o.loss = run.train;
    o.corrupt = a.corrupt;
    GradCheckReport r = run_gradcheck(o);
    std::printf("%s", r.to_text().c_str());
    return r.pass ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-grained cross-modal alignment: training, evaluation and zero-shot segmentation"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the decoder");
    t->add_option("-c,--config", train.config, "key=value config file")->check(CLI::ExistingFile);
    t->add_option("-s,--set", train.overrides, "Override, e.g. --set loss.k_pix=0.1");
    t->add_option("-o,--out", train.out, "Run directory (relative to MGCA_OUTPUT_ROOT)");
    t->add_flag("!--no-eval", train.evaluate, "Skip the final evaluation");

    EvalArgs ev;
    auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    e->add_option("-k,--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    e->add_option("-d,--data", ev.data, "Dataset directory (default: the checkpoint's data config)");
    e->add_option("-s,--set", ev.overrides, "Config override");
    e->add_option("--meta-points", ev.meta_points, "Semantic units per window");
    e->add_flag("--pixel-unit", ev.pixel_unit, "Classify every pixel embedding on its own");
    e->add_flag("--background", ev.background, "Predict background by thresholding");
    e->add_option("--threshold", ev.threshold, "Background threshold");
    e->add_option("-o,--out", ev.out, "Directory for metrics.txt and metrics.kv");
    e->add_option("--masks", ev.masks, "Directory for predicted masks");

    SegmentArgs sg;
    auto* s = app.add_subcommand("segment", "Segment one image");
    s->add_option("-k,--checkpoint", sg.checkpoint, "Checkpoint file")->required();
    s->add_option("-i,--image", sg.image, "Input image (binary PPM)")->required();
    s->add_option("--classes", sg.classes, "Comma-separated class names");
    s->add_option("--classes-file", sg.classes_file, "One class name per line");
    s->add_flag("--background", sg.background, "Predict background by thresholding");
    s->add_option("--threshold", sg.threshold, "Background threshold");
    s->add_option("--meta-points", sg.meta_points, "Semantic units per window");
    s->add_flag("--pixel-unit", sg.pixel_unit, "Classify every pixel embedding on its own");
    s->add_option("-o,--out", sg.out, "Output mask (PGM)");

    GenArgs gen;
    auto* g = app.add_subcommand("gen-data", "Write a synthetic shapes dataset");
    g->add_option("-c,--config", gen.config, "key=value config file")->check(CLI::ExistingFile);
    g->add_option("-s,--set", gen.overrides, "Config override");
    g->add_option("-o,--out", gen.out, "Dataset directory");

    GradArgs gc;
    auto* c = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
    c->add_option("-c,--config", gc.config, "key=value config file")->check(CLI::ExistingFile);
    c->add_option("-s,--set", gc.overrides, "Config override (loss.* toggles select the objectives)");
    c->add_option("--seed", gc.seed, "Instance seed");
    c->add_flag("--corrupt", gc.corrupt, "Scale the analytic gradients (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*t) return cmd_train(train);
        if (*e) return cmd_evaluate(ev);
        if (*s) return cmd_segment(sg);
        if (*g) return cmd_gen_data(gen);
        if (*c) return cmd_grad_check(gc);
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "config error: %s\n", err.what());
        return kConfig;
    } catch (const DataError& err) {
        std::fprintf(stderr, "data error: %s\n", err.what());
        return kData;
    } catch (const NumericError& err) {
        std::fprintf(stderr, "numeric error: %s\n", err.what());
        return kNumeric;
    } catch (const IoError& err) {
        std::fprintf(stderr, "io error: %s\n", err.what());
        return kIo;
    } catch (const Error& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kData;
    } catch (const std::filesystem::filesystem_error& err) {
        std::fprintf(stderr, "io error: %s\n", err.what());
        return kIo;
    }
    return kOk;
}
