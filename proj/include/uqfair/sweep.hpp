#pragma once

#include "uqfair/manifest.hpp"
#include "uqfair/metrics.hpp"
#include "uqfair/uncertainty.hpp"

#include <optional>
#include <string>
#include <vector>

namespace uqfair {

// Per-threshold series for one (metric, scope) pair. taus descend from 100
// to 0; undefined points stay nullopt (a subgroup emptied out at that tau).
struct FairnessCurve {
    std::string metric;
    std::string scope;      // "overall", a class name, a region name or a target name
    bool error_like = false; // lower-is-better metrics (rmse, mae, ftp, ftn)
    std::vector<double> taus;
    std::vector<std::optional<double>> em_d0, em_d1, em_all;
    std::vector<std::optional<double>> fg; // |em_d0 - em_d1| where both defined
    std::vector<size_t> n0, n1;            // retained instances (voxels for segmentation)
};

struct QubratsEntry {
    std::string region;
    std::optional<double> d0, d1, all;
};

struct SweepResult {
    std::vector<FairnessCurve> curves;
    std::vector<QubratsEntry> qubrats; // segmentation only
};

// [100, 100-step, ..., 0]; throws BadStep unless step divides 100.
std::vector<double> threshold_grid(double step);

// Element retained iff normalized uncertainty <= tau.
Mask filter_retained(std::span<const double> normalized, double tau);

std::optional<double> fairness_gap(const MetricValue& em0, const MetricValue& em1);

// Runs the full threshold sweep for the manifest's task. Deterministic for
// any thread count: per-instance statistics may be computed in parallel but
// are reduced in instance order.
SweepResult sweep_curves(const EvalManifest& manifest, const std::vector<double>& grid,
                         int threads = 1);

// Adjacency flags for the desiderata: FG non-increasing and EM non-degrading
// as tau decreases. Direction flips for error-like curves.
struct BehaviorFlags {
    std::vector<uint8_t> fg_improved;
    std::vector<uint8_t> em_d0_improved, em_d1_improved, em_all_improved;
    double frac_fg = 0.0, frac_em_d0 = 0.0, frac_em_d1 = 0.0, frac_em_all = 0.0;
};
BehaviorFlags desired_behavior_flags(const FairnessCurve& curve);

} // namespace uqfair
