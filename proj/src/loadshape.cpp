#include "gridcast/loadshape.hpp"

#include <algorithm>
#include <cmath>

#include "gridcast/errors.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

double mu_law_compress(double x, double mu) {
    if (mu <= 0.0) throw Error("mu-law parameter must be positive");
    return std::log(1.0 + mu * x) / std::log(1.0 + mu);
}

double mu_law_expand(double x, double mu) {
    if (mu <= 0.0) throw Error("mu-law parameter must be positive");
    return (std::pow(1.0 + mu, x) - 1.0) / mu;
}

std::vector<LoadShape> mu_law_family(const LoadShape& base, const CompandingConfig& cfg, int count) {
    if (count < 1) throw Error("variant count must be >= 1");
    if (base.multipliers.empty()) throw Error("base load shape is empty");
    for (double m : base.multipliers)
        if (m < 0.0 || m > 1.0) throw Error("base load shape leaves [0, 1]");
    for (double mu : cfg.mu_values)
        if (mu <= 0.0) throw Error("mu-law parameter must be positive");
    if (cfg.jitter_sigma < 0.0) throw Error("jitter_sigma must be >= 0");

    Rng rng(cfg.seed);
    std::vector<LoadShape> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        double mu;
        if (!cfg.mu_values.empty()) {
            mu = cfg.mu_values[static_cast<std::size_t>(k) % cfg.mu_values.size()];
        } else {
            mu = std::exp(rng.uniform(std::log(cfg.mu_min), std::log(cfg.mu_max)));
        }
        CompandDirection dir;
        switch (cfg.direction) {
            case CompandingConfig::DirectionPolicy::CompressOnly: dir = CompandDirection::Compress; break;
            case CompandingConfig::DirectionPolicy::ExpandOnly: dir = CompandDirection::Expand; break;
            default: dir = (k % 2 == 0) ? CompandDirection::Compress : CompandDirection::Expand;
        }

        LoadShape shape;
        shape.id = base.id + "_v" + std::to_string(k);
        shape.multipliers.reserve(base.multipliers.size());
        for (double x : base.multipliers) {
            double y = dir == CompandDirection::Compress ? mu_law_compress(x, mu)
                                                         : mu_law_expand(x, mu);
            if (cfg.jitter_sigma > 0.0) y *= 1.0 + cfg.jitter_sigma * rng.normal();
            shape.multipliers.push_back(std::clamp(y, 0.0, 1.0));
        }
        out.push_back(std::move(shape));
    }
    return out;
}

std::vector<double> moving_median(const std::vector<double>& series, int window) {
    if (series.empty()) throw Error("moving_median needs a non-empty series");
    if (window < 1 || window % 2 == 0) throw Error("moving_median window must be odd and >= 1");
    if (window == 1) return series;

    const int half = window / 2;
    const int n = static_cast<int>(series.size());
    std::vector<double> out(series.size());
    std::vector<double> buf(static_cast<std::size_t>(window));
    for (int i = 0; i < n; ++i) {
        for (int k = -half; k <= half; ++k) {
            int j = std::clamp(i + k, 0, n - 1);  // replicate padding
            buf[static_cast<std::size_t>(k + half)] = series[static_cast<std::size_t>(j)];
        }
        auto mid = buf.begin() + half;
        std::nth_element(buf.begin(), mid, buf.end());
        out[static_cast<std::size_t>(i)] = *mid;
    }
    return out;
}

LoadShape synth_base_shape(int length, std::uint64_t seed) {
    if (length < 1) throw Error("base shape length must be >= 1");
    Rng rng(seed);
    double phase_daily = rng.uniform(0.0, 2.0 * M_PI);
    double phase_weekly = rng.uniform(0.0, 2.0 * M_PI);
    LoadShape shape;
    shape.id = "base";
    shape.multipliers.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
        double daily = 0.5 * (1.0 + std::sin(2.0 * M_PI * t / 96.0 + phase_daily));
        double weekly = 0.5 * (1.0 + std::sin(2.0 * M_PI * t / 672.0 + phase_weekly));
        shape.multipliers.push_back(0.1 + 0.8 * (0.65 * daily + 0.35 * weekly));
    }
    return shape;
}

}  // namespace gridcast
