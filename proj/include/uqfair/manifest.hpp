#pragma once

#include "uqfair/tensor.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace uqfair {

enum class TaskKind { Classification, Segmentation, Regression };
enum class Measure { Entropy, SampleVar, TotalVar };
enum class NormMode { Bound, Minmax };

std::string to_string(TaskKind t);
std::string to_string(Measure m);
std::string to_string(NormMode m);
TaskKind task_from_string(const std::string& s);
Measure measure_from_string(const std::string& s);
NormMode norm_from_string(const std::string& s);

// A named binary region formed by a union of class labels
// (segmentation only, e.g. WT = {1,2,3}).
struct RegionDef {
    std::string name;
    std::vector<int> labels;
};

struct InstanceRecord {
    std::string id;
    int group = 0; // binary sensitive attribute
    // truth, one of the three depending on task:
    int truth_class = -1;                 // classification
    std::string truth_path;               // segmentation label map (UQT1)
    std::vector<double> truth_values;     // regression targets
    std::string prediction_path;          // MC prediction dump; may be empty pre-prediction
    std::string uncertainty_path;         // optional: precomputed raw uncertainty (segmentation)
};

struct EvalManifest {
    TaskKind task = TaskKind::Classification;
    int class_count = 0;
    std::vector<std::string> class_names;
    std::vector<RegionDef> regions;
    std::vector<std::string> target_names;
    Measure measure = Measure::Entropy;
    NormMode normalization = NormMode::Bound;
    std::optional<double> bound_max;
    std::vector<InstanceRecord> instances;
    std::filesystem::path base_dir; // directory of the manifest; relative paths resolve here

    std::filesystem::path resolve(const std::string& rel) const;
    size_t count_group(int g) const;
};

// Loads and eagerly validates. Throws ValidationError (with instance id and
// rule) or IoError. `require_predictions` additionally checks that every
// prediction file exists.
EvalManifest load_manifest(const std::filesystem::path& path, bool require_predictions = false);

void save_manifest(const EvalManifest& m, const std::filesystem::path& path);

// One instance's Monte-Carlo prediction stack, decoded to doubles.
//   classification: probs[t*C + c], T x C
//   segmentation (full): probs[(t*C + c)*V + v], T x C x V, vol_dims = (P,Q,S)
//   segmentation (precomputed): mean probs [C x V] in probs with T=1,
//       per-voxel raw uncertainty in raw_unc
//   regression: samples[(t*K + k)*2 + {0:mean,1:predvar}], T x K x 2
struct McPredictions {
    TaskKind task = TaskKind::Classification;
    size_t T = 0, C = 0, K = 0;
    std::array<uint64_t, 3> vol_dims{0, 0, 0};
    bool precomputed = false;
    std::vector<double> probs;
    std::vector<double> raw_unc;

    size_t voxel_count() const { return static_cast<size_t>(vol_dims[0] * vol_dims[1] * vol_dims[2]); }
};

// Loads + validates one instance's prediction stack (probability closure
// within 1e-4, V-hat >= 0, shape agreement with the manifest).
McPredictions load_predictions(const EvalManifest& m, const InstanceRecord& inst);

// Segmentation truth label map as flat class indices.
std::vector<int> load_label_map(const EvalManifest& m, const InstanceRecord& inst,
                                std::array<uint64_t, 3>* dims_out = nullptr);

} // namespace uqfair
