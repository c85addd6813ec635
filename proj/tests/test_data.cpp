#include "doctest.h"

#include "mgca/archive.hpp"
#include "mgca/config.hpp"
#include "mgca/data.hpp"
#include "mgca/metrics.hpp"
#include "mgca/netpbm.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace mgca;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mgca_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

SyntheticConfig small(int n) {
    SyntheticConfig c;
    c.n_samples = n;
    return c;
}

} // namespace

TEST_CASE("generator is deterministic") {
    auto a = gen_synthetic(small(5));
    auto b = gen_synthetic(small(5));
    REQUIRE(a.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(a[i].image.data == b[i].image.data);
        CHECK(a[i].gt_mask.data == b[i].gt_mask.data);
        CHECK(a[i].caption == b[i].caption);
    }
    auto c = gen_synthetic([] {
        auto s = small(5);
        s.seed = 9;
        return s;
    }());
    CHECK(c[0].image.data != a[0].image.data);
    CHECK(gen_synthetic(small(0)).empty());
}

TEST_CASE("generated samples respect the layout constraints") {
    auto samples = gen_synthetic(small(100));
    const auto concepts = default_concepts();
    for (const auto& s : samples) {
        CHECK(s.image.height == 64);
        for (double v : s.image.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        int fg = 0;
        for (int v : s.gt_mask.data) {
            fg += v != 0;
            CHECK(v >= 0);
            CHECK(v <= int(concepts.size()));
        }
        const double frac = double(fg) / double(s.gt_mask.data.size());
        CHECK(frac >= 0.05);
        CHECK(frac <= 0.6);

        CHECK(s.shapes.size() >= 1);
        CHECK(s.shapes.size() <= 3);
        std::set<std::string> colors;
        int area_sum = 0;
        for (const auto& sh : s.shapes) {
            colors.insert(concepts[size_t(sh.concept_index)].color);
            auto raster = rasterize(sh, 64, 64);
            int area = 0, labelled = 0;
            for (size_t p = 0; p < raster.size(); ++p) {
                area += raster[p];
                labelled += raster[p] && s.gt_mask.data[p] == sh.concept_index + 1;
            }
            CHECK(area == sh.area);
            CHECK(labelled == area); // shapes do not overlap
            area_sum += area;
        }
        CHECK(colors.size() == s.shapes.size());
        CHECK(area_sum == fg);

        // The caption names exactly the concepts present.
        CHECK(s.caption.rfind("a photo of a ", 0) == 0);
        for (size_t k = 0; k < concepts.size(); ++k) {
            const bool present = std::find(s.class_set.begin(), s.class_set.end(), int(k)) != s.class_set.end();
            CHECK((s.caption.find(concepts[k].name()) != std::string::npos) == present);
        }
        CHECK(s.nouns.size() == s.shapes.size());
    }
}

TEST_CASE("generator errors") {
    auto c = small(1);
    c.image_size = 60;
    CHECK_THROWS_AS(gen_synthetic(c), ConfigError);
    c = small(1);
    c.concepts.resize(2);
    CHECK_THROWS_AS(gen_synthetic(c), DataError);
}

TEST_CASE("caption augmentation and sampling") {
    CHECK(augment_captions("x", {"circle"}, {"a photo of a {}"}) == std::vector<std::string>{"a photo of a circle"});
    CHECK(augment_captions("x", {"a", "b"}, {"{}", "the {}", "a {} here"}).size() == 6);
    CHECK(augment_captions("x", {}, {"{}"}).empty());

    CaptionSampler s(1);
    for (int i = 0; i < 20; ++i) CHECK(s.pick("orig", {}) == "orig");
    std::set<std::string> seen;
    std::vector<std::string> gen = {"g1", "g2"};
    for (int i = 0; i < 200; ++i) seen.insert(s.pick("orig", gen));
    CHECK(seen == std::set<std::string>{"orig", "g1", "g2"});
}

TEST_CASE("dataset directory round trip") {
    fs::path root = scratch("dataset");
    auto samples = gen_synthetic(small(4));
    write_dataset(root, samples, default_concepts());
    Dataset ds = read_dataset(root);
    REQUIRE(ds.records.size() == 4);
    CHECK(ds.classes.front() == "background");
    CHECK(ds.classes.size() == 7);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(ds.records[i].mask.data == samples[i].gt_mask.data);
        CHECK(ds.records[i].caption == samples[i].caption);
        CHECK(ds.records[i].nouns == samples[i].nouns);
        for (size_t k = 0; k < samples[i].image.data.size(); ++k)
            CHECK(std::abs(ds.records[i].image.data[k] - samples[i].image.data[k]) <= 0.5 / 255.0 + 1e-12);
    }
    fs::remove(root / "captions.tsv");
    Dataset eval_only = read_dataset(root);
    CHECK(eval_only.records.size() == 4);
    CHECK(eval_only.records[0].caption.empty());

    fs::remove(root / "masks" / (ds.records[0].id + ".pgm"));
    CHECK_THROWS_AS(read_dataset(root), DataError);
    CHECK_THROWS_AS(read_dataset(root / "missing"), DataError);
}

TEST_CASE("netpbm round trip") {
    fs::path root = scratch("netpbm");
    LabelMap m(3, 5);
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = int(i * 17 % 256);
    write_pgm(root / "m.pgm", m);
    CHECK(read_pgm(root / "m.pgm").data == m.data);
    m.data[0] = 300;
    CHECK_THROWS_AS(write_pgm(root / "bad.pgm", m), DataError);

    Image im(2, 3);
    for (size_t i = 0; i < im.data.size(); ++i) im.data[i] = double(i) / 17.0;
    write_ppm(root / "i.ppm", im);
    Image back = read_ppm(root / "i.ppm");
    CHECK(back.height == 2);
    CHECK(back.width == 3);
    CHECK(std::abs(back.data[5] - im.data[5]) < 0.5 / 255.0 + 1e-12);
    CHECK_THROWS(read_ppm(root / "nope.ppm"));
}

TEST_CASE("mIoU examples") {
    LabelMap gt(2, 2, 1), pred(2, 2, 1);
    gt.data = {1, 2, 0, 1};
    pred = gt;
    ConfusionAccumulator acc(3);
    acc.add(gt, pred);
    CHECK(miou(acc, false).mean == doctest::Approx(1.0));
    CHECK(miou(acc, true).mean == doctest::Approx(1.0));

    ConfusionAccumulator two(2);
    two.add(LabelMap(2, 2, 0), LabelMap(2, 2, 1));
    MiouReport r = miou(two, true);
    CHECK(r.iou[0] == 0.0);
    CHECK(std::isnan(r.iou[1]));
    CHECK(r.mean == 0.0);
    CHECK(r.counted == 1);

    CHECK_THROWS_AS(miou(ConfusionAccumulator(3), false), DataError);
    CHECK_THROWS_AS(acc.add(LabelMap(2, 2, 5), pred), DataError);
    CHECK_THROWS_AS(acc.add(LabelMap(1, 2, 0), pred), DataError);
}

TEST_CASE("mIoU equals the set-based oracle") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const int K = 4;
        LabelMap gt(8, 8), pred(8, 8);
        for (auto& v : gt.data) v = int(rng() % K);
        for (auto& v : pred.data) v = int(rng() % K);
        gt.data[3] = 255; // ignored
        ConfusionAccumulator acc(K);
        acc.add(gt, pred);
        CHECK(acc.total() == 63);
        MiouReport rep = miou(acc, false);
        double sum = 0;
        int n = 0;
        for (int k = 1; k < K; ++k) {
            std::set<int> G, P;
            for (int p = 0; p < 64; ++p) {
                if (gt.data[size_t(p)] == 255) continue;
                if (gt.data[size_t(p)] == k) G.insert(p);
                if (pred.data[size_t(p)] == k) P.insert(p);
            }
            if (G.empty()) continue;
            int inter = 0;
            for (int p : G) inter += int(P.count(p));
            const double iou = double(inter) / double(G.size() + P.size() - size_t(inter));
            CHECK(rep.iou[size_t(k)] == doctest::Approx(iou));
            CHECK(rep.iou[size_t(k)] >= 0.0);
            CHECK(rep.iou[size_t(k)] <= 1.0);
            sum += iou;
            ++n;
        }
        CHECK(rep.mean == doctest::Approx(sum / n));
    }
}

TEST_CASE("confusion accumulation is additive") {
    std::mt19937_64 rng(6);
    std::vector<LabelMap> gts, preds;
    for (int i = 0; i < 4; ++i) {
        LabelMap g(4, 4), p(4, 4);
        for (auto& v : g.data) v = int(rng() % 3);
        for (auto& v : p.data) v = int(rng() % 3);
        gts.push_back(g);
        preds.push_back(p);
    }
    ConfusionAccumulator all(3), a(3), b(3);
    for (int i = 0; i < 4; ++i) {
        all.add(gts[size_t(i)], preds[size_t(i)]);
        (i < 2 ? a : b).add(gts[size_t(i)], preds[size_t(i)]);
    }
    a.merge(b);
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p) CHECK(a.at(t, p) == all.at(t, p));
    CHECK(a.total() == 64);
}

TEST_CASE("metrics reports") {
    ConfusionAccumulator acc(3);
    acc.add(1, 1);
    acc.add(2, 1);
    MiouReport r = miou(acc, false);
    std::vector<std::string> names = {"background", "red circle", "green square"};
    const std::string kv = format_report_kv(r, names);
    CHECK(kv.find("miou=0.25") != std::string::npos);
    CHECK(kv.find("iou.red_circle=0.5") != std::string::npos);
    const std::string table = format_report_table(r, names);
    CHECK(table.find("red circle") != std::string::npos);
}

TEST_CASE("config parsing and overrides") {
    Config c = Config::parse("# comment\nloss.k_pix = 0.1\ntrain.steps=10\n");
    CHECK(c.get_double("loss.k_pix", 0) == 0.1);
    CHECK(c.get_int("train.steps", 0) == 10);
    c.apply_override("train.steps=20");
    CHECK(c.get_int("train.steps", 0) == 20);
    CHECK(c.get_int("train.batch_size", 7) == 7);
    CHECK_THROWS_AS(Config::parse("loss.bogus=1"), ConfigError);
    CHECK_THROWS_AS(Config::parse("no equals sign"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("train.steps"), ConfigError);
    c.set("loss.obj", "false");
    CHECK_FALSE(c.get_bool("loss.obj", true));
    c.set("loss.obj", "maybe");
    CHECK_THROWS_AS(c.get_bool("loss.obj", true), ConfigError);
    c.set("train.steps", "ten");
    CHECK_THROWS_AS(c.get_int("train.steps", 0), ConfigError);
    CHECK_THROWS_AS(Config::load("/nonexistent/mgca.cfg"), ConfigError);
}

TEST_CASE("run config echo round-trips") {
    Config c = Config::parse("loss.k_pix=0.2\nloss.pix=false\ntrain.seed=4\ninference.meta_points=16\n");
    RunConfig r = RunConfig::from(c);
    CHECK(r.train.k_pix == 0.2);
    CHECK_FALSE(r.train.use_pix);
    CHECK(r.train_seed == 4);
    CHECK(r.inference.meta_points == 16);
    CHECK(r.inference.logit_scale == doctest::Approx(1.0 / 0.07));
    RunConfig again = RunConfig::from(Config::parse(r.echo().to_text()));
    CHECK(again.echo().to_text() == r.echo().to_text());
    CHECK_THROWS_AS(RunConfig::from(Config::parse("loss.k=2")), ConfigError);
}

TEST_CASE("named-array archive round trip") {
    fs::path root = scratch("archive");
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    NamedArrayArchive ar;
    Mat a(3, 4);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = n(rng);
    ar.add("a", a);
    ar.add("b", Mat::Constant(1, 2, 0.5));
    ar.set_meta("note", "hello world");
    ar.save(root / "x.mgca");

    NamedArrayArchive back = NamedArrayArchive::load(root / "x.mgca");
    CHECK(*back.find_meta("note") == "hello world");
    CHECK(back.find_meta("missing") == nullptr);
    CHECK(back.array("a").shape == std::vector<std::int64_t>{3, 4});
    CHECK((back.matrix("a") - a).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(back.matrix("b")(0, 1) == 0.5);
    CHECK_THROWS_AS(back.array("zzz"), IoError);

    // Manifest is human-readable, payload is little-endian float32.
    std::ifstream in(root / "x.mgca", std::ios::binary);
    std::string first;
    std::getline(in, first);
    CHECK(first == "MGCA-ARCHIVE 1");
    CHECK(fs::file_size(root / "x.mgca") > (12 + 2) * 4);

    std::ofstream(root / "bad.mgca") << "not an archive\n";
    CHECK_THROWS_AS(NamedArrayArchive::load(root / "bad.mgca"), IoError);
    CHECK_THROWS_AS(NamedArrayArchive::load(root / "absent.mgca"), IoError);
}
