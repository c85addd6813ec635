#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mgca {

/// K x K confusion counts, rows ground truth, columns prediction.
class ConfusionAccumulator {
  public:
    explicit ConfusionAccumulator(int classes, int ignore_index = 255, int background_index = 0);

    int classes() const { return classes_; }
    int ignore_index() const { return ignore_index_; }
    int background_index() const { return background_index_; }

    /// Pixels whose ground truth equals ignore_index are skipped. Throws
    /// DataError for out-of-range labels or mismatched sizes.
    void add(const LabelMap& truth, const LabelMap& prediction);
    void add(int truth, int prediction);
    void merge(const ConfusionAccumulator& other);

    std::int64_t at(int truth, int prediction) const { return matrix_[size_t(truth) * classes_ + prediction]; }
    std::int64_t total() const;

  private:
    int classes_;
    int ignore_index_;
    int background_index_;
    std::vector<std::int64_t> matrix_;
};

struct MiouReport {
    std::vector<double> iou;          // per class; NaN for classes without support
    std::vector<std::int64_t> support; // ground-truth pixel count
    double mean = 0.0;
    int counted = 0; // classes entering the mean
};

/// IoU_k = TP / (TP + FP + FN); classes with zero ground-truth support are
/// excluded, and the background class only counts when include_background.
/// Throws DataError on an empty accumulator.
MiouReport miou(const ConfusionAccumulator& acc, bool include_background);

/// Aligned plain-text table, one row per class.
std::string format_report_table(const MiouReport& report, const std::vector<std::string>& names);
/// key=value lines.
std::string format_report_kv(const MiouReport& report, const std::vector<std::string>& names);

} // namespace mgca
