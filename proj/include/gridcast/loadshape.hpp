#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gridcast {

/// Normalized multiplier time series in [0, 1] describing a load profile.
struct LoadShape {
    std::string id;
    std::vector<double> multipliers;
};

enum class CompandDirection { Compress, Expand };

struct CompandingConfig {
    // Explicit mu list, cycled per variant. When empty, mu is drawn
    // log-uniformly from [mu_min, mu_max] per variant.
    std::vector<double> mu_values;
    double mu_min = 1.0;
    double mu_max = 255.0;

    enum class DirectionPolicy { Alternate, CompressOnly, ExpandOnly };
    DirectionPolicy direction = DirectionPolicy::Alternate;

    double jitter_sigma = 0.01;  // relative Gaussian noise, clipped to [0, 1]
    std::uint64_t seed = 1;
};

/// y = ln(1 + mu x) / ln(1 + mu); fixes 0 and 1, strictly increasing.
double mu_law_compress(double x, double mu);

/// Inverse companding: y = ((1 + mu)^x - 1) / mu.
double mu_law_expand(double x, double mu);

/// Derives `count` profile variants from a base shape by companding plus
/// clipped relative jitter. Deterministic under cfg.seed. Throws on mu <= 0
/// or count < 1.
std::vector<LoadShape> mu_law_family(const LoadShape& base, const CompandingConfig& cfg, int count);

/// Replicate-padded sliding median; length preserved. Window must be odd and
/// >= 1; series must be non-empty.
std::vector<double> moving_median(const std::vector<double>& series, int window = 3);

/// Synthetic diurnal-style base profile (two sinusoids plus seeded phase),
/// values inside [0.1, 0.9].
LoadShape synth_base_shape(int length, std::uint64_t seed);

}  // namespace gridcast
