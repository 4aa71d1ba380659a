#pragma once

#include "uqfair/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace uqfair {

enum class Strategy { Baseline, Balanced, GroupDro };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Two-layer MLP: input -> hidden (ReLU, inverted dropout) -> head.
// Classification head emits C logits; regression head emits (mean,
// log-variance) per target so a predicted variance exists.
struct ToyModel {
    size_t in_dim = 0, hidden = 0, out_dim = 0;
    bool classifier = true;
    size_t targets = 0; // regression only
    double dropout_p = 0.2;
    std::vector<double> w1, b1, w2, b2; // w1: hidden x in, w2: out x hidden
};

struct GroupWeights {
    std::array<double, 2> q{0.5, 0.5};
};

struct TrainConfig {
    Strategy strategy = Strategy::Baseline;
    int epochs = 60;
    int batch_size = 32;
    double lr = 0.1;
    double eta_q = 0.01;
    int ensemble_size = 3;   // E
    int dropout_samples = 20; // S, so T = E*S
    int hidden = 16;
    double dropout_p = 0.2;
    uint64_t seed = 0;
};

// In-memory training set; features row-major N x dim.
struct ToyDataset {
    bool classification = true;
    size_t n = 0, dim = 0;
    int class_count = 0;
    size_t targets = 0;
    std::vector<double> x;
    std::vector<int> y_class;
    std::vector<double> y_reg; // N x targets
    std::vector<int> group;
    std::vector<std::string> ids;

    ToyDataset subset(const std::vector<size_t>& indices) const;
};

// Per-(class, group) undersampling to the smaller side (per-group only for
// regression); seeded selection without replacement, output order shuffled.
ToyDataset balanced_resample(const ToyDataset& ds, uint64_t seed);

// Exponentiated-gradient update q'_g proportional to q_g * exp(eta * loss_g).
GroupWeights groupdro_step(const GroupWeights& q, const std::array<double, 2>& group_losses,
                           double eta_q);

struct Gradients {
    std::vector<double> w1, b1, w2, b2;
};

// Analytic gradients of the weighted batch loss (cross-entropy or Gaussian
// NLL). dropout_mask is per (sample, hidden unit), 0/1; weights are
// per-sample loss weights summing to 1.
double toy_loss(const ToyModel& m, const ToyDataset& ds, const std::vector<size_t>& batch,
                const std::vector<uint8_t>& dropout_mask, const std::vector<double>& weights,
                std::vector<double>* per_sample_loss = nullptr);
Gradients toy_gradients(const ToyModel& m, const ToyDataset& ds,
                        const std::vector<size_t>& batch,
                        const std::vector<uint8_t>& dropout_mask,
                        const std::vector<double>& weights, double* loss_out = nullptr);

struct TrainResult {
    std::vector<ToyModel> models;
    std::vector<GroupWeights> final_q; // one per ensemble member (groupdro)
};

// Trains E models by mini-batch gradient descent; balanced strategy
// resamples first, groupdro interleaves the q update per batch.
// Deterministic for a given (dataset, config).
TrainResult train_toy(const ToyDataset& ds, const TrainConfig& cfg);

// T = E*S stochastic forward passes with dropout active. Returns a
// prediction stack ready for writing: classification T x C (f64),
// regression T x K x 2 with (mean, exp(log-variance)).
Tensor mc_predict_instance(const std::vector<ToyModel>& ensemble,
                           std::span<const double> features, const TrainConfig& cfg,
                           uint64_t instance_index);

void save_ensemble(const TrainResult& r, const TrainConfig& cfg,
                   const std::string& manifest_path, const std::filesystem::path& path);
struct LoadedEnsemble {
    TrainResult result;
    TrainConfig cfg;
    std::string manifest_path;
};
LoadedEnsemble load_ensemble(const std::filesystem::path& path);

} // namespace uqfair
