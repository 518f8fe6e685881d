#pragma once

#include <span>

namespace gridcast {

/// Absolute and relative error summary. MAPE/MAXAPE are percentages and only
/// populated in relative mode; they stay 0 otherwise.
struct MetricSet {
    double mae = 0.0;
    double maxae = 0.0;
    double mape = 0.0;
    double maxape = 0.0;
    bool relative = false;
};

/// MAE / MAXAE over the pair of vectors; with relative set, each absolute
/// error is divided by |truth_i| (every truth value must be nonzero) and
/// scaled to percent. Throws on a length mismatch or empty input.
MetricSet compute_metrics(std::span<const double> truth, std::span<const double> predicted,
                          bool relative);

}  // namespace gridcast
