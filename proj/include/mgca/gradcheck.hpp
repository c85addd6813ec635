#pragma once

#include "mgca/losses.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mgca {

struct GradCheckOptions {
    std::uint64_t seed = 7;
    int batch = 2;
    int grid = 2; // decoder input grid side; L = (2 * grid)^2
    int channels = 8;
    double step = 1e-4;
    double tolerance = 1e-3;
    TrainConfig loss;     // toggles select which objectives are checked
    bool corrupt = false; // negative control: perturb the analytic gradients
};

/// Norm-wise relative errors ||analytic - numeric|| / max(||analytic||, ||numeric||).
struct GradCheckEntry {
    std::string loss;
    double err_v = 0.0;
    double err_t = 0.0;
    double err_decoder = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;

    std::string to_text() const;
};

/// Compares analytic gradients of each enabled objective (and their sum) with
/// respect to V, T and the decoder parameters against central differences.
GradCheckReport run_gradcheck(const GradCheckOptions& opts);

double relative_error(const Eigen::Ref<const Eigen::VectorXd>& analytic, const Eigen::Ref<const Eigen::VectorXd>& numeric);

} // namespace mgca
