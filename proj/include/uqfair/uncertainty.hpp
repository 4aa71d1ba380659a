#pragma once

#include "uqfair/manifest.hpp"

#include <optional>
#include <span>
#include <vector>

namespace uqfair {

// Raw + 0-100 normalized uncertainty values. Shape mirrors the raw input:
// one value per instance (classification), per voxel (segmentation) or per
// (instance, target) (regression).
struct UncertaintyScores {
    std::vector<double> raw;
    std::vector<double> normalized; // each in [0,100]
    Measure measure = Measure::Entropy;
    NormMode mode = NormMode::Bound;
};

// Mean over the sample axis of a T x C probability stack.
std::vector<double> predictive_mean(std::span<const double> probs, size_t T, size_t C);

// Shannon entropy in nats, 0*ln 0 = 0. Throws ValidationError on negative input.
double entropy(std::span<const double> mean_probs);

// Population variance exactly as (1/T) sum y^2 - ((1/T) sum y)^2, clamped at 0.
double sample_variance(std::span<const double> samples);

// Sample variance of the per-sample means plus the mean predicted variance,
// for one regression target. Throws on V-hat < 0.
double total_variance(const McPredictions& mc, size_t target);

// Maps raw values to [0,100]. Bound mode: 100*raw/bound_max clamped at 100.
// Minmax: affine over [min,max] of the whole collection; degenerate range -> 0.
UncertaintyScores normalize(std::vector<double> raw, Measure measure, NormMode mode,
                            std::optional<double> bound_max = std::nullopt);

} // namespace uqfair
