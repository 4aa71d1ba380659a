#include "uqfair/manifest.hpp"
#include "uqfair/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

using nlohmann::json;

namespace uqfair {

std::string to_string(TaskKind t) {
    switch (t) {
        case TaskKind::Classification: return "classification";
        case TaskKind::Segmentation: return "segmentation";
        case TaskKind::Regression: return "regression";
    }
    return "?";
}
std::string to_string(Measure m) {
    switch (m) {
        case Measure::Entropy: return "entropy";
        case Measure::SampleVar: return "sample-var";
        case Measure::TotalVar: return "total-var";
    }
    return "?";
}
std::string to_string(NormMode m) { return m == NormMode::Bound ? "bound" : "minmax"; }

TaskKind task_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::Classification;
    if (s == "segmentation") return TaskKind::Segmentation;
    if (s == "regression") return TaskKind::Regression;
    throw ValidationError("unknown task: " + s);
}
Measure measure_from_string(const std::string& s) {
    if (s == "entropy") return Measure::Entropy;
    if (s == "sample-var") return Measure::SampleVar;
    if (s == "total-var") return Measure::TotalVar;
    throw ValidationError("unknown measure: " + s);
}
NormMode norm_from_string(const std::string& s) {
    if (s == "bound") return NormMode::Bound;
    if (s == "minmax") return NormMode::Minmax;
    throw ValidationError("unknown normalization: " + s);
}

std::filesystem::path EvalManifest::resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
}

size_t EvalManifest::count_group(int g) const {
    size_t n = 0;
    for (const auto& i : instances)
        if (i.group == g) ++n;
    return n;
}

EvalManifest load_manifest(const std::filesystem::path& path, bool require_predictions) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("ParseError in " + path.string() + ": " + e.what());
    }

    EvalManifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    try {
        m.task = task_from_string(j.at("task").get<std::string>());
        if (j.contains("class_count")) m.class_count = j["class_count"].get<int>();
        if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
        if (j.contains("target_names")) m.target_names = j["target_names"].get<std::vector<std::string>>();
        if (j.contains("measure")) m.measure = measure_from_string(j["measure"].get<std::string>());
        if (j.contains("normalization")) m.normalization = norm_from_string(j["normalization"].get<std::string>());
        if (j.contains("bound_max")) m.bound_max = j["bound_max"].get<double>();
        if (j.contains("regions")) {
            for (const auto& r : j["regions"]) {
                RegionDef rd;
                rd.name = r.at("name").get<std::string>();
                rd.labels = r.at("labels").get<std::vector<int>>();
                m.regions.push_back(std::move(rd));
            }
        }
        for (const auto& ij : j.at("instances")) {
            InstanceRecord rec;
            rec.id = ij.at("id").get<std::string>();
            rec.group = ij.at("group").get<int>();
            const auto& truth = ij.at("truth");
            switch (m.task) {
                case TaskKind::Classification: rec.truth_class = truth.get<int>(); break;
                case TaskKind::Segmentation: rec.truth_path = truth.get<std::string>(); break;
                case TaskKind::Regression: rec.truth_values = truth.get<std::vector<double>>(); break;
            }
            if (ij.contains("prediction_path") && !ij["prediction_path"].is_null())
                rec.prediction_path = ij["prediction_path"].get<std::string>();
            if (ij.contains("uncertainty_path") && !ij["uncertainty_path"].is_null())
                rec.uncertainty_path = ij["uncertainty_path"].get<std::string>();
            m.instances.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw ValidationError("ParseError in " + path.string() + ": " + e.what());
    }

    // eager validation
    if (m.instances.size() < 2)
        throw ValidationError("manifest must contain at least 2 instances");
    if (m.task != TaskKind::Regression) {
        if (m.class_count < 1) throw ValidationError("class_count must be >= 1");
        if (!m.class_names.empty() && static_cast<int>(m.class_names.size()) != m.class_count)
            throw ValidationError("class_names length != class_count");
    }
    if (m.task == TaskKind::Segmentation) {
        if (m.regions.empty()) throw ValidationError("segmentation manifest needs regions");
        for (const auto& r : m.regions) {
            if (r.labels.empty())
                throw ValidationError("region " + r.name + ": empty label set");
            for (int l : r.labels)
                if (l < 0 || l >= m.class_count)
                    throw ValidationError("region " + r.name + ": label out of range");
        }
    }
    if (m.task == TaskKind::Regression && m.target_names.empty())
        throw ValidationError("regression manifest needs target_names");

    std::set<std::string> ids;
    bool has0 = false, has1 = false;
    for (const auto& rec : m.instances) {
        if (!ids.insert(rec.id).second)
            throw ValidationError("instance " + rec.id + ": duplicate id");
        if (rec.group != 0 && rec.group != 1)
            throw ValidationError("instance " + rec.id + ": group must be 0 or 1");
        (rec.group == 0 ? has0 : has1) = true;
        switch (m.task) {
            case TaskKind::Classification:
                if (rec.truth_class < 0 || rec.truth_class >= m.class_count)
                    throw ValidationError("instance " + rec.id + ": class index out of range");
                break;
            case TaskKind::Segmentation:
                if (!std::filesystem::exists(m.resolve(rec.truth_path)))
                    throw ValidationError("instance " + rec.id + ": truth file missing: " + rec.truth_path);
                break;
            case TaskKind::Regression:
                if (rec.truth_values.size() != m.target_names.size())
                    throw ValidationError("instance " + rec.id + ": truth arity != target count");
                for (double v : rec.truth_values)
                    if (!std::isfinite(v))
                        throw ValidationError("instance " + rec.id + ": non-finite target");
                break;
        }
        if (require_predictions) {
            if (rec.prediction_path.empty())
                throw ValidationError("instance " + rec.id + ": prediction_path missing");
            if (!std::filesystem::exists(m.resolve(rec.prediction_path)))
                throw ValidationError("instance " + rec.id + ": prediction file missing: " + rec.prediction_path);
        }
    }
    if (!has0 || !has1)
        throw ValidationError(std::string("MissingGroup: subgroup D") + (has0 ? "1" : "0") +
                              " has no instances");
    return m;
}

void save_manifest(const EvalManifest& m, const std::filesystem::path& path) {
    json j;
    j["task"] = to_string(m.task);
    if (m.task != TaskKind::Regression) {
        j["class_count"] = m.class_count;
        j["class_names"] = m.class_names;
    }
    if (m.task == TaskKind::Segmentation) {
        j["regions"] = json::array();
        for (const auto& r : m.regions)
            j["regions"].push_back({{"name", r.name}, {"labels", r.labels}});
    }
    if (m.task == TaskKind::Regression) j["target_names"] = m.target_names;
    j["measure"] = to_string(m.measure);
    j["normalization"] = to_string(m.normalization);
    if (m.bound_max) j["bound_max"] = *m.bound_max;
    j["instances"] = json::array();
    for (const auto& rec : m.instances) {
        json ij;
        ij["id"] = rec.id;
        ij["group"] = rec.group;
        switch (m.task) {
            case TaskKind::Classification: ij["truth"] = rec.truth_class; break;
            case TaskKind::Segmentation: ij["truth"] = rec.truth_path; break;
            case TaskKind::Regression: ij["truth"] = rec.truth_values; break;
        }
        ij["prediction_path"] = rec.prediction_path.empty() ? json(nullptr) : json(rec.prediction_path);
        if (!rec.uncertainty_path.empty()) ij["uncertainty_path"] = rec.uncertainty_path;
        j["instances"].push_back(std::move(ij));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

static void check_prob_closure(const std::vector<double>& probs, size_t rows, size_t C,
                               size_t stride_c, size_t base, const std::string& id) {
    double sum = 0.0;
    (void)rows;
    for (size_t c = 0; c < C; ++c) {
        const double p = probs[base + c * stride_c];
        if (p < -1e-9 || p > 1.0 + 1e-4)
            throw ValidationError("instance " + id + ": probability outside [0,1]");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-4)
        throw ValidationError("instance " + id + ": class probabilities sum to " +
                              std::to_string(sum) + ", outside 1 +/- 1e-4");
}

McPredictions load_predictions(const EvalManifest& m, const InstanceRecord& inst) {
    if (inst.prediction_path.empty())
        throw ValidationError("instance " + inst.id + ": no prediction_path");
    const Tensor t = read_tensor(m.resolve(inst.prediction_path));

    McPredictions mc;
    mc.task = m.task;
    const size_t n = t.elem_count();
    mc.probs.resize(n);
    for (size_t i = 0; i < n; ++i) mc.probs[i] = t.at(i);

    switch (m.task) {
        case TaskKind::Classification: {
            if (t.dims.size() != 2)
                throw ValidationError("instance " + inst.id + ": classification dump must be T x C");
            mc.T = t.dims[0];
            mc.C = t.dims[1];
            if (mc.T < 2) throw ValidationError("instance " + inst.id + ": need T >= 2 samples");
            if (mc.C != static_cast<size_t>(m.class_count))
                throw ValidationError("instance " + inst.id + ": C != class_count");
            for (size_t s = 0; s < mc.T; ++s)
                check_prob_closure(mc.probs, mc.T, mc.C, 1, s * mc.C, inst.id);
            break;
        }
        case TaskKind::Segmentation: {
            if (!inst.uncertainty_path.empty()) {
                // precomputed mode: mean probs [C,P,Q,S] + raw uncertainty [P,Q,S]
                if (t.dims.size() != 4)
                    throw ValidationError("instance " + inst.id + ": precomputed dump must be C x P x Q x S");
                mc.precomputed = true;
                mc.T = 1;
                mc.C = t.dims[0];
                mc.vol_dims = {t.dims[1], t.dims[2], t.dims[3]};
                const Tensor u = read_tensor(m.resolve(inst.uncertainty_path));
                if (u.dims.size() != 3 || u.dims[0] != t.dims[1] || u.dims[1] != t.dims[2] ||
                    u.dims[2] != t.dims[3])
                    throw ValidationError("instance " + inst.id + ": uncertainty volume shape mismatch");
                mc.raw_unc.resize(u.elem_count());
                for (size_t i = 0; i < mc.raw_unc.size(); ++i) {
                    mc.raw_unc[i] = u.at(i);
                    if (!(mc.raw_unc[i] >= 0.0))
                        throw ValidationError("instance " + inst.id + ": negative raw uncertainty");
                }
            } else {
                if (t.dims.size() != 5)
                    throw ValidationError("instance " + inst.id + ": full MC dump must be T x C x P x Q x S");
                mc.T = t.dims[0];
                mc.C = t.dims[1];
                mc.vol_dims = {t.dims[2], t.dims[3], t.dims[4]};
                if (mc.T < 2) throw ValidationError("instance " + inst.id + ": need T >= 2 samples");
            }
            if (mc.C != static_cast<size_t>(m.class_count))
                throw ValidationError("instance " + inst.id + ": C != class_count");
            const size_t V = mc.voxel_count();
            for (size_t s = 0; s < mc.T; ++s)
                for (size_t v = 0; v < V; ++v)
                    check_prob_closure(mc.probs, mc.T, mc.C, V, s * mc.C * V + v, inst.id);
            break;
        }
        case TaskKind::Regression: {
            if (t.dims.size() != 3 || t.dims[2] != 2)
                throw ValidationError("instance " + inst.id + ": regression dump must be T x K x 2");
            mc.T = t.dims[0];
            mc.K = t.dims[1];
            if (mc.T < 2) throw ValidationError("instance " + inst.id + ": need T >= 2 samples");
            if (mc.K != m.target_names.size())
                throw ValidationError("instance " + inst.id + ": K != target count");
            for (size_t s = 0; s < mc.T; ++s)
                for (size_t k = 0; k < mc.K; ++k) {
                    const double vhat = mc.probs[(s * mc.K + k) * 2 + 1];
                    if (!(vhat >= 0.0))
                        throw ValidationError("instance " + inst.id + ": NegativeVariance (V-hat < 0)");
                }
            break;
        }
    }
    return mc;
}

std::vector<int> load_label_map(const EvalManifest& m, const InstanceRecord& inst,
                                std::array<uint64_t, 3>* dims_out) {
    const Tensor t = read_tensor(m.resolve(inst.truth_path));
    if (t.dims.size() != 3)
        throw ValidationError("instance " + inst.id + ": label map must be P x Q x S");
    if (dims_out) *dims_out = {t.dims[0], t.dims[1], t.dims[2]};
    std::vector<int> labels(t.elem_count());
    for (size_t i = 0; i < labels.size(); ++i) {
        const int l = static_cast<int>(t.at(i));
        if (l < 0 || l >= m.class_count)
            throw ValidationError("instance " + inst.id + ": voxel label out of range");
        labels[i] = l;
    }
    return labels;
}

} // namespace uqfair
