#pragma once

#include "uqfair/manifest.hpp"
#include "uqfair/toy.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace uqfair {

// Synthetic dataset generator configuration. noise0/noise1 are per-group:
// label-flip probability (classification), target noise sigma (regression),
// prediction corruption scale (segmentation). group_shift moves group 1's
// feature distribution (classification/regression) or shrinks its enhancing
// sphere (segmentation).
struct SynthConfig {
    TaskKind task = TaskKind::Classification;
    size_t m = 50, l = 50; // |D0|, |D1|
    int classes = 2;
    int targets = 2;
    int dim = 2;
    double group_shift = 0.0;
    double noise0 = 0.0, noise1 = 0.0;
    std::array<uint64_t, 3> vol{16, 16, 16};
    int mc_samples = 20; // T of the emitted synthetic MC dumps
    uint64_t seed = 0;
};

// Each generator writes manifest.json, synth_meta.json, per-instance
// prediction dumps under pred/, plus features.uqt (classification,
// regression) or truth volumes under truth/ (segmentation). Deterministic
// bytes per (config, seed).
void gen_classification(const SynthConfig& cfg, const std::filesystem::path& outdir);
void gen_segmentation(const SynthConfig& cfg, const std::filesystem::path& outdir);
void gen_regression(const SynthConfig& cfg, const std::filesystem::path& outdir);
void generate(const SynthConfig& cfg, const std::filesystem::path& outdir);

// Bridges a generated dataset back into the toy trainer.
ToyDataset dataset_from_manifest(const EvalManifest& manifest,
                                 const std::filesystem::path& features_path);

} // namespace uqfair
