#pragma once

#include "uqfair/manifest.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace uqfair {

// A single evaluation-metric value; undefined iff nothing was retained
// (or the denominator is vacuous).
struct MetricValue {
    std::optional<double> value;
    size_t n_retained = 0;
};

using Mask = std::vector<uint8_t>;

// --- classification ----------------------------------------------------

MetricValue accuracy(std::span<const int> truth, std::span<const int> pred,
                     std::span<const uint8_t> retained);

MetricValue per_class_accuracy(std::span<const int> truth, std::span<const int> pred,
                               std::span<const uint8_t> retained, int cls);

// Unweighted mean of per-class recalls over classes with >= 1 retained instance.
MetricValue balanced_accuracy(std::span<const int> truth, std::span<const int> pred,
                              std::span<const uint8_t> retained, int class_count);

// One-vs-rest AUC per class via the rank-sum statistic (ties count 1/2),
// macro-averaged over classes with at least one retained positive and
// negative. probs is row-major N x C mean probabilities.
MetricValue macro_auc_ovr(std::span<const int> truth, std::span<const double> probs,
                          std::span<const uint8_t> retained, int class_count);

// Argmax with ties resolved to the lowest class index.
int argmax_class(std::span<const double> probs);

// --- segmentation ------------------------------------------------------

Mask region_mask(std::span<const int> labels, const RegionDef& region);

// 2|P&G| / (|P|+|G|) over retained voxels; both empty -> 1.
MetricValue dice(std::span<const uint8_t> pred_mask, std::span<const uint8_t> truth_mask,
                 std::span<const uint8_t> retained);

// Filtered true positive / true negative ratios relative to the unfiltered
// counts; zero denominator -> 0.
std::pair<double, double> ftp_ftn(std::span<const uint8_t> pred_mask,
                                  std::span<const uint8_t> truth_mask,
                                  std::span<const uint8_t> retained);

// (AUC(dice) + (1-AUC(ftp)) + (1-AUC(ftn))) / 3 scaled to [0,100]; each AUC a
// trapezoidal mean over the tau grid, skipping undefined points.
std::optional<double> qubrats_score(std::span<const double> taus,
                                    std::span<const std::optional<double>> dice_curve,
                                    std::span<const std::optional<double>> ftp_curve,
                                    std::span<const std::optional<double>> ftn_curve);

// --- regression ---------------------------------------------------------

MetricValue rmse(std::span<const double> truth, std::span<const double> pred,
                 std::span<const uint8_t> retained);
MetricValue mae(std::span<const double> truth, std::span<const double> pred,
                std::span<const uint8_t> retained);

} // namespace uqfair
