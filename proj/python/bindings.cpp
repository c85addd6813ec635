#include "mgca/config.hpp"
#include "mgca/gradcheck.hpp"
#include "mgca/train.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace mgca;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// V: (B, L, C); T: (B, C).
BatchEmbeddings to_batch(const Array& v, const Mat& t) {
    if (v.ndim() != 3) throw ShapeError("V must have shape (B, L, C)");
    const auto B = v.shape(0), L = v.shape(1), C = v.shape(2);
    BatchEmbeddings b;
    for (py::ssize_t i = 0; i < B; ++i) b.V.push_back(Eigen::Map<const Mat>(v.data(i, 0, 0), L, C));
    b.T = t;
    b.validate();
    return b;
}

Array to_array(const SimilarityTensor& s) {
    const int B = s.batch(), L = s.pixels();
    Array out({B, B, L});
    auto m = out.mutable_unchecked<3>();
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j)
            for (int p = 0; p < L; ++p) m(i, j, p) = s.at(i, j, p);
    return out;
}

SimilarityTensor from_array(const Array& s) {
    if (s.ndim() != 3 || s.shape(0) != s.shape(1)) throw ShapeError("S must have shape (B, B, L)");
    const int B = int(s.shape(0)), L = int(s.shape(2));
    SimilarityTensor t = SimilarityTensor::zeros(B, L);
    auto m = s.unchecked<3>();
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j)
            for (int p = 0; p < L; ++p) t.per_image[i](p, j) = m(i, j, p);
    return t;
}

Array to_array(const std::vector<Mat>& v) {
    const auto B = py::ssize_t(v.size()), L = v.empty() ? 0 : py::ssize_t(v[0].rows()),
               C = v.empty() ? 0 : py::ssize_t(v[0].cols());
    Array out({B, L, C});
    for (py::ssize_t i = 0; i < B; ++i) std::copy(v[i].data(), v[i].data() + L * C, out.mutable_data(i, 0, 0));
    return out;
}

Image to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("image must have shape (H, W, 3)");
    Image im(int(a.shape(0)), int(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), im.data.begin());
    return im;
}

Array to_array(const Image& im) {
    Array out({im.height, im.width, im.channels});
    std::copy(im.data.begin(), im.data.end(), out.mutable_data());
    return out;
}

py::array_t<int> to_array(const LabelMap& m) {
    py::array_t<int> out({m.height, m.width});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

LabelMap to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("label map must have shape (H, W)");
    LabelMap m(int(a.shape(0)), int(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

RunConfig run_config(const std::map<std::string, std::string>& overrides) {
    Config c;
    for (const auto& [k, v] : overrides) c.set(k, v);
    return RunConfig::from(c);
}

py::dict losses_dict(const LossBreakdown& l) {
    py::dict d;
    d["total"] = l.total;
    d["obj"] = l.obj;
    d["reg"] = l.reg;
    d["pix"] = l.pix;
    return d;
}

// A trained (or freshly initialised) model with the run settings it came from.
struct Session {
    RunConfig run;
    std::shared_ptr<Model> model;
    Dataset data;
    bool have_data = false;

    const Dataset& dataset() {
        if (!have_data) {
            data = run.data_path.empty() ? to_dataset(gen_synthetic(run.data), run.data.concepts)
                                         : read_dataset(run.data_path);
            have_data = true;
        }
        return data;
    }

    InferenceConfig inference(int meta_points, bool pixel_unit) const {
        InferenceConfig cfg = run.inference;
        if (meta_points > 0) cfg.meta_points = meta_points;
        cfg.pixel_unit = pixel_unit;
        return cfg;
    }
};

} // namespace

PYBIND11_MODULE(_mgca, m) {
    m.doc() = "Multi-grained cross-modal alignment: losses, semantic-unit inference and a toy training harness";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("similarity", [](const Array& v, const Mat& t) { return to_array(similarity(to_batch(v, t))); },
          py::arg("V"), py::arg("T"), "S[i, j, p] = V[i, p] . T[j]; returns (B, B, L).");
    m.def("softmax", &softmax, py::arg("logits"));
    m.def("mask_cardinality", &mask_cardinality, py::arg("pixels"), py::arg("area_fraction"));
    m.def("topk_mask", [](const Vec& prob, double frac) {
        Mask mk = topk_mask(prob, frac);
        return std::vector<int>(mk.begin(), mk.end());
    }, py::arg("prob"), py::arg("area_fraction"));
    m.def("object_representation", [](const Mat& pixels, const Vec& prob, const std::vector<int>& mask) {
        return object_representation(pixels, prob, Mask(mask.begin(), mask.end()));
    }, py::arg("pixels"), py::arg("prob"), py::arg("mask"));
    m.def("object_representations", [](const Array& v, const Mat& t, double k, double k_n) {
        BatchEmbeddings b = to_batch(v, t);
        ObjectRepresentation r = object_representations_batch(b, similarity(b), k, k_n);
        const int B = r.batch, C = b.channels(), L = b.pixels();
        Array reps({B, B, C});
        py::array_t<int> masks({B, B, L});
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j) {
                std::copy(r.at(i, j).data(), r.at(i, j).data() + C, reps.mutable_data(i, j, 0));
                std::copy(r.mask(i, j).begin(), r.mask(i, j).end(), masks.mutable_data(i, j, 0));
            }
        return py::make_tuple(reps, masks);
    }, py::arg("V"), py::arg("T"), py::arg("k") = 0.4, py::arg("k_n") = 0.05,
          "Returns (R of shape (B, B, C), masks of shape (B, B, L)).");

    m.def("semi_hard_rank", &semi_hard_rank, py::arg("pixels"), py::arg("k_pix"));
    m.def("mine_pixel_pairs", [](const Array& s, double k_pix, double f) {
        PixelPairs p = mine_pixel_pairs(from_array(s), k_pix, f);
        py::dict d;
        d["rank"] = p.rank;
        d["positive"] = p.positive;
        d["negative"] = p.negative;
        d["positive_index"] = p.positive_index;
        d["negative_index"] = p.negative_index;
        return d;
    }, py::arg("S"), py::arg("k_pix"), py::arg("f"));

    py::class_<TrainConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("tau", &TrainConfig::tau)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("k_n", &TrainConfig::k_n)
        .def_readwrite("k_pix", &TrainConfig::k_pix)
        .def_readwrite("f", &TrainConfig::f)
        .def_readwrite("use_obj", &TrainConfig::use_obj)
        .def_readwrite("use_reg", &TrainConfig::use_reg)
        .def_readwrite("use_pix", &TrainConfig::use_pix)
        .def("scale_for", &TrainConfig::scale_for, py::arg("channels"));

    m.def("loss_object", [](const Array& v, const Mat& t, const TrainConfig& c) {
        BatchEmbeddings b = to_batch(v, t);
        return loss_object(object_representations_batch(b, similarity(b), c.k, c.k_n), b.T, c.tau);
    }, py::arg("V"), py::arg("T"), py::arg("config") = TrainConfig{});
    m.def("loss_region", [](const Array& v, const Mat& t, const TrainConfig& c) {
        BatchEmbeddings b = to_batch(v, t);
        return loss_region(object_representations_batch(b, similarity(b), c.k, c.k_n), b.T, c.tau);
    }, py::arg("V"), py::arg("T"), py::arg("config") = TrainConfig{});
    m.def("loss_pixel", [](const Array& v, const Mat& t, const TrainConfig& c) {
        BatchEmbeddings b = to_batch(v, t);
        return loss_pixel(similarity(b), c.k_pix, c.scale_for(b.channels()), c.tau);
    }, py::arg("V"), py::arg("T"), py::arg("config") = TrainConfig{});
    m.def("loss_total", [](const Array& v, const Mat& t, const TrainConfig& c, bool with_grad) -> py::object {
        BatchEmbeddings b = to_batch(v, t);
        if (!with_grad) return losses_dict(loss_total(b, c));
        EmbeddingGrad g;
        py::dict d = losses_dict(loss_total(b, c, &g));
        return py::make_tuple(d, to_array(g.V), g.T);
    }, py::arg("V"), py::arg("T"), py::arg("config") = TrainConfig{}, py::arg("with_grad") = false,
          "Dict of losses, or (losses, dV, dT) with with_grad.");

    m.def("gradcheck", [](std::uint64_t seed, bool corrupt) {
        GradCheckOptions o;
        o.seed = seed;
        o.corrupt = corrupt;
        GradCheckReport r = run_gradcheck(o);
        py::list entries;
        for (const auto& e : r.entries) {
            py::dict d;
            d["loss"] = e.loss;
            d["err_v"] = e.err_v;
            d["err_t"] = e.err_t;
            d["err_decoder"] = e.err_decoder;
            d["pass"] = e.pass;
            entries.append(d);
        }
        return py::make_tuple(r.pass, entries);
    }, py::arg("seed") = 7, py::arg("corrupt") = false);

    m.def("sample_meta_points", [](int h, int w, int count) {
        std::vector<std::pair<int, int>> out;
        for (const auto& p : sample_meta_points(h, w, count)) out.emplace_back(p.row, p.col);
        return out;
    }, py::arg("grid_h"), py::arg("grid_w"), py::arg("count"));
    m.def("window_offsets", &window_offsets, py::arg("length"), py::arg("window"), py::arg("stride"));

    m.def("gen_synthetic", [](const std::map<std::string, std::string>& overrides) {
        RunConfig run = run_config(overrides);
        py::list out;
        for (const auto& s : gen_synthetic(run.data)) {
            py::dict d;
            d["image"] = to_array(s.image);
            d["mask"] = to_array(s.gt_mask);
            d["caption"] = s.caption;
            d["nouns"] = s.nouns;
            out.append(d);
        }
        return out;
    }, py::arg("overrides") = std::map<std::string, std::string>{},
          "Synthetic samples; overrides use the dotted config keys (data.n_samples, data.seed, ...).");
    m.def("miou", [](const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& truth,
                     const std::vector<py::array_t<int, py::array::c_style | py::array::forcecast>>& pred, int classes,
                     bool include_background) {
        if (truth.size() != pred.size()) throw ShapeError("truth and prediction lists differ in length");
        ConfusionAccumulator acc(classes);
        for (size_t i = 0; i < truth.size(); ++i) acc.add(to_labels(truth[i]), to_labels(pred[i]));
        MiouReport r = miou(acc, include_background);
        return py::make_tuple(r.mean, r.iou);
    }, py::arg("truth"), py::arg("prediction"), py::arg("classes"), py::arg("include_background") = false);

    py::class_<Session>(m, "Session")
        .def(py::init([](const std::map<std::string, std::string>& overrides) {
            Session s;
            s.run = run_config(overrides);
            s.model = std::make_shared<Model>(s.run.model);
            return s;
        }), py::arg("overrides") = std::map<std::string, std::string>{})
        .def_static("load", [](const std::string& path) {
            LoadedCheckpoint ck = load_checkpoint(path);
            Session s;
            s.run = ck.run;
            s.model = std::shared_ptr<Model>(std::move(ck.model));
            return s;
        }, py::arg("path"))
        .def_property_readonly("config", [](const Session& s) { return s.run.echo().values(); })
        .def_property_readonly("decoder_parameter_count", [](const Session& s) { return s.model->decoder.parameter_count(); })
        .def("train", [](Session& s) {
            std::vector<StepLog> log;
            {
                py::gil_scoped_release release;
                log = Trainer(s.dataset(), *s.model, s.run.train, s.run.train_seed).run();
            }
            py::list out;
            for (const auto& l : log) {
                py::dict d = losses_dict(l.loss);
                d["step"] = l.step;
                d["lr"] = l.lr;
                out.append(d);
            }
            return out;
        }, "Runs the configured number of decoder updates; returns the per-step log.")
        .def("evaluate", [](Session& s, int meta_points, bool pixel_unit) {
            MiouReport r;
            {
                py::gil_scoped_release release;
                r = evaluate(s.dataset(), *s.model, s.inference(meta_points, pixel_unit), BackgroundMode::Ignore).report;
            }
            py::dict d;
            d["miou"] = r.mean;
            d["iou"] = r.iou;
            d["classes"] = s.dataset().classes;
            return d;
        }, py::arg("meta_points") = 0, py::arg("pixel_unit") = false,
             "Foreground mIoU over the session's dataset (background pixels ignored).")
        .def("segment", [](const Session& s, const Array& image, const std::vector<std::string>& classes,
                           bool background, double threshold, int meta_points, bool pixel_unit) {
            ClassVocabulary vocab = build_vocabulary(classes, default_prompt_templates(), *s.model->text_encoder,
                                                     background, threshold);
            SegmentationResult r = segment_image(to_image(image), *s.model->image_encoder, s.model->decoder, vocab,
                                                 s.inference(meta_points, pixel_unit));
            return to_array(r.labels);
        }, py::arg("image"), py::arg("classes"), py::arg("background") = false, py::arg("threshold") = 0.5,
             py::arg("meta_points") = 0, py::arg("pixel_unit") = false,
             "Label map of shape (H, W); index len(classes) marks background when enabled.")
        .def("save", [](const Session& s, const std::string& path) { save_checkpoint(path, *s.model, s.run); },
             py::arg("path"));
}
