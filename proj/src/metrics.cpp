#include "gridcast/metrics.hpp"

#include <cmath>
#include <string>

#include "gridcast/errors.hpp"

namespace gridcast {

MetricSet compute_metrics(std::span<const double> truth, std::span<const double> predicted,
                          bool relative) {
    if (truth.size() != predicted.size())
        throw Error("metric vectors differ in length: " + std::to_string(truth.size()) + " vs " +
                    std::to_string(predicted.size()));
    if (truth.empty()) throw Error("metric vectors must be non-empty");

    MetricSet m;
    m.relative = relative;
    double sum_abs = 0.0, sum_rel = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double err = std::abs(truth[i] - predicted[i]);
        sum_abs += err;
        m.maxae = std::max(m.maxae, err);
        if (relative) {
            double denom = std::abs(truth[i]);
            if (denom == 0.0) throw Error("relative metrics need nonzero truth values");
            double rel = err / denom;
            sum_rel += rel;
            m.maxape = std::max(m.maxape, rel * 100.0);
        }
    }
    m.mae = sum_abs / static_cast<double>(truth.size());
    if (relative) m.mape = 100.0 * sum_rel / static_cast<double>(truth.size());
    return m;
}

}  // namespace gridcast
