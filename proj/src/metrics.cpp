#include "mgca/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mgca {

ConfusionAccumulator::ConfusionAccumulator(int classes, int ignore_index, int background_index)
    : classes_(classes), ignore_index_(ignore_index), background_index_(background_index),
      matrix_(size_t(classes) * classes, 0) {
    if (classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionAccumulator::add(int truth, int prediction) {
    if (truth == ignore_index_) return;
    if (truth < 0 || truth >= classes_ || prediction < 0 || prediction >= classes_)
        throw DataError("label out of range: truth " + std::to_string(truth) + ", prediction " +
                        std::to_string(prediction) + " with " + std::to_string(classes_) + " classes");
    ++matrix_[size_t(truth) * classes_ + prediction];
}

void ConfusionAccumulator::add(const LabelMap& truth, const LabelMap& prediction) {
    if (truth.height != prediction.height || truth.width != prediction.width)
        throw DataError("ground truth and prediction sizes differ");
    for (size_t p = 0; p < truth.data.size(); ++p) add(truth.data[p], prediction.data[p]);
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
    if (other.classes_ != classes_) throw DataError("cannot merge confusion matrices of different sizes");
    for (size_t i = 0; i < matrix_.size(); ++i) matrix_[i] += other.matrix_[i];
}

std::int64_t ConfusionAccumulator::total() const {
    std::int64_t t = 0;
    for (auto v : matrix_) t += v;
    return t;
}

MiouReport miou(const ConfusionAccumulator& acc, bool include_background) {
    if (acc.total() == 0) throw DataError("mIoU of an empty confusion matrix");
    const int K = acc.classes();
    MiouReport r;
    r.iou.assign(size_t(K), std::numeric_limits<double>::quiet_NaN());
    r.support.assign(size_t(K), 0);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
        std::int64_t tp = acc.at(k, k), fn = 0, fp = 0;
        for (int j = 0; j < K; ++j) {
            if (j == k) continue;
            fn += acc.at(k, j);
            fp += acc.at(j, k);
        }
        r.support[size_t(k)] = tp + fn;
        if (tp + fn == 0) continue;
        r.iou[size_t(k)] = double(tp) / double(tp + fp + fn);
        if (k == acc.background_index() && !include_background) continue;
        sum += r.iou[size_t(k)];
        ++r.counted;
    }
    r.mean = r.counted ? sum / r.counted : 0.0;
    return r;
}

std::string format_report_table(const MiouReport& report, const std::vector<std::string>& names) {
    std::ostringstream out;
    size_t width = 5;
    for (const auto& n : names) width = std::max(width, n.size());
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %10s\n", int(width), "class", "IoU(%)", "support");
    out << buf;
    for (size_t k = 0; k < report.iou.size(); ++k) {
        const std::string name = k < names.size() ? names[k] : std::to_string(k);
        if (std::isnan(report.iou[k]))
            std::snprintf(buf, sizeof buf, "%-*s  %8s  %10lld\n", int(width), name.c_str(), "-",
                          static_cast<long long>(report.support[k]));
        else
            std::snprintf(buf, sizeof buf, "%-*s  %8.2f  %10lld\n", int(width), name.c_str(), 100.0 * report.iou[k],
                          static_cast<long long>(report.support[k]));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-*s  %8.2f  %10d\n", int(width), "mIoU", 100.0 * report.mean, report.counted);
    out << buf;
    return out.str();
}

std::string format_report_kv(const MiouReport& report, const std::vector<std::string>& names) {
    std::ostringstream out;
    out.precision(10);
    out << "miou=" << report.mean << "\n";
    out << "classes_counted=" << report.counted << "\n";
    for (size_t k = 0; k < report.iou.size(); ++k) {
        std::string name = k < names.size() ? names[k] : std::to_string(k);
        for (auto& ch : name)
            if (ch == ' ' || ch == '=') ch = '_';
        out << "iou." << name << "=";
        if (std::isnan(report.iou[k]))
            out << "nan";
        else
            out << report.iou[k];
        out << "\n";
    }
    return out.str();
}

} // namespace mgca
