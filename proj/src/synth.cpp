#include "uqfair/synth.hpp"
#include "uqfair/errors.hpp"
#include "uqfair/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

using nlohmann::json;

namespace uqfair {

namespace {

void check_common(const SynthConfig& cfg) {
    if (cfg.m < 1 || cfg.l < 1) throw ValidationError("BadConfig: group sizes must be >= 1");
    if (cfg.noise0 < 0.0 || cfg.noise1 < 0.0)
        throw ValidationError("BadConfig: noise_sigma must be >= 0");
    if (cfg.mc_samples < 2) throw ValidationError("BadConfig: mc_samples must be >= 2");
}

std::string instance_id(int group, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "d%d_%04zu", group, i);
    return buf;
}

void write_meta(const std::filesystem::path& outdir, const SynthConfig& cfg, json extra) {
    json j;
    j["config"] = {{"task", to_string(cfg.task)},
                   {"m", cfg.m},
                   {"l", cfg.l},
                   {"classes", cfg.classes},
                   {"targets", cfg.targets},
                   {"dim", cfg.dim},
                   {"group_shift", cfg.group_shift},
                   {"noise0", cfg.noise0},
                   {"noise1", cfg.noise1},
                   {"vol", cfg.vol},
                   {"mc_samples", cfg.mc_samples},
                   {"seed", cfg.seed}};
    j.update(extra);
    std::ofstream out(outdir / "synth_meta.json", std::ios::trunc);
    if (!out) throw IoError("cannot write synth_meta.json");
    out << j.dump(2) << "\n";
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

} // namespace

void gen_classification(const SynthConfig& cfg, const std::filesystem::path& outdir) {
    check_common(cfg);
    if (cfg.classes < 2 || cfg.dim < 2 || cfg.dim > 8)
        throw ValidationError("BadConfig: classification needs classes >= 2 and dim in [2,8]");
    std::filesystem::create_directories(outdir / "pred");

    const size_t N = cfg.m + cfg.l;
    const int C = cfg.classes;
    const size_t D = static_cast<size_t>(cfg.dim);
    const double T = cfg.mc_samples;

    // class means on a circle in the first two feature dims
    std::vector<std::vector<double>> means(static_cast<size_t>(C), std::vector<double>(D, 0.0));
    for (int c = 0; c < C; ++c) {
        means[static_cast<size_t>(c)][0] = 3.0 * std::cos(2.0 * M_PI * c / C);
        means[static_cast<size_t>(c)][1] = 3.0 * std::sin(2.0 * M_PI * c / C);
    }

    const bool separable = C == 2 && cfg.noise0 == 0.0 && cfg.noise1 == 0.0;

    EvalManifest man;
    man.task = TaskKind::Classification;
    man.class_count = C;
    for (int c = 0; c < C; ++c) man.class_names.push_back("class_" + std::to_string(c));
    man.measure = Measure::Entropy;
    man.normalization = NormMode::Bound;

    std::vector<double> features(N * D);
    for (size_t i = 0; i < N; ++i) {
        const int group = i < cfg.m ? 0 : 1;
        const size_t within = group == 0 ? i : i - cfg.m;
        Rng rng(Rng::derive(cfg.seed, i));

        const int cls = static_cast<int>(rng.next_below(static_cast<uint64_t>(C)));
        double* x = &features[i * D];
        for (size_t d = 0; d < D; ++d) x[d] = means[static_cast<size_t>(cls)][d] + rng.next_gaussian();
        if (separable) {
            // enforce a margin along dim 0 so the stored hyperplane witnesses
            // Bayes separability (means sit at x0 = +/-3)
            const double dir = cls == 0 ? 1.0 : -1.0;
            if (dir * x[0] < 0.25) x[0] = dir * 0.25;
        }
        if (group == 1 && D >= 2) x[1] += cfg.group_shift;

        // optional label noise: flip to a uniformly random other class
        int label = cls;
        const double flip_p = group == 0 ? cfg.noise0 : cfg.noise1;
        if (flip_p > 0.0 && rng.next_double() < flip_p)
            label = (cls + 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(C - 1)))) % C;

        // synthetic MC predictions: distance-to-mean logits + per-sample jitter;
        // the oracle ignores the group shift, so group 1 is systematically harder
        const double jitter = 0.3 + (group == 0 ? cfg.noise0 : cfg.noise1);
        std::vector<double> rows(static_cast<size_t>(T) * static_cast<size_t>(C));
        std::vector<double> logits(static_cast<size_t>(C));
        for (int t = 0; t < cfg.mc_samples; ++t) {
            for (int c = 0; c < C; ++c) {
                double d2 = 0.0;
                for (size_t d = 0; d < D; ++d) {
                    const double e = x[d] - means[static_cast<size_t>(c)][d];
                    d2 += e * e;
                }
                logits[static_cast<size_t>(c)] = -d2 / 8.0 + jitter * rng.next_gaussian();
            }
            const auto p = softmax(logits);
            std::copy(p.begin(), p.end(),
                      rows.begin() + static_cast<long>(t) * C);
        }
        const std::string id = instance_id(group, within);
        const std::string pred_rel = "pred/" + id + ".uqt";
        write_tensor(Tensor::from_f64({static_cast<uint64_t>(cfg.mc_samples),
                                       static_cast<uint64_t>(C)},
                                      rows),
                     outdir / pred_rel);

        InstanceRecord rec;
        rec.id = id;
        rec.group = group;
        rec.truth_class = label;
        rec.prediction_path = pred_rel;
        man.instances.push_back(std::move(rec));
    }

    write_tensor(Tensor::from_f64({N, D}, features), outdir / "features.uqt");
    save_manifest(man, outdir / "manifest.json");

    json extra;
    extra["features_path"] = "features.uqt";
    if (separable)
        extra["separating_hyperplane"] = {{"w", std::vector<double>{1.0}},
                                          {"axis", 0},
                                          {"bias", 0.0},
                                          {"margin", 0.25},
                                          {"positive_class", 0}};
    write_meta(outdir, cfg, extra);
}

void gen_regression(const SynthConfig& cfg, const std::filesystem::path& outdir) {
    check_common(cfg);
    if (cfg.targets < 1 || cfg.dim < 1)
        throw ValidationError("BadConfig: regression needs targets >= 1, dim >= 1");
    std::filesystem::create_directories(outdir / "pred");

    const size_t N = cfg.m + cfg.l;
    const size_t D = static_cast<size_t>(cfg.dim);
    const size_t K = static_cast<size_t>(cfg.targets);

    Rng coef_rng(Rng::derive(cfg.seed, 0xC0EF));
    std::vector<double> A(K * D), b(K);
    for (auto& v : A) v = 2.0 * coef_rng.next_double() - 1.0;
    for (auto& v : b) v = 2.0 * coef_rng.next_double() - 1.0;

    EvalManifest man;
    man.task = TaskKind::Regression;
    for (size_t k = 0; k < K; ++k) man.target_names.push_back("target_" + std::to_string(k));
    man.measure = Measure::TotalVar;
    man.normalization = NormMode::Minmax;

    std::vector<double> features(N * D);
    for (size_t i = 0; i < N; ++i) {
        const int group = i < cfg.m ? 0 : 1;
        const size_t within = group == 0 ? i : i - cfg.m;
        Rng rng(Rng::derive(cfg.seed, i));
        const double sigma = group == 0 ? cfg.noise0 : cfg.noise1;

        double* x = &features[i * D];
        for (size_t d = 0; d < D; ++d) x[d] = rng.next_gaussian();
        if (group == 1 && D >= 2) x[1] += cfg.group_shift;

        std::vector<double> y(K);
        for (size_t k = 0; k < K; ++k) {
            double v = b[k];
            for (size_t d = 0; d < D; ++d) v += A[k * D + d] * x[d];
            y[k] = v + sigma * rng.next_gaussian();
        }

        // synthetic MC dump: jittered exact-model means, V-hat near the true
        // group noise variance
        const double jitter = 0.1 + 0.5 * sigma;
        const double vhat = sigma * sigma + 0.01;
        std::vector<double> rows(static_cast<size_t>(cfg.mc_samples) * K * 2);
        for (int t = 0; t < cfg.mc_samples; ++t) {
            for (size_t k = 0; k < K; ++k) {
                double mu = b[k];
                for (size_t d = 0; d < D; ++d) mu += A[k * D + d] * x[d];
                rows[(static_cast<size_t>(t) * K + k) * 2] = mu + jitter * rng.next_gaussian();
                rows[(static_cast<size_t>(t) * K + k) * 2 + 1] = vhat;
            }
        }
        const std::string id = instance_id(group, within);
        const std::string pred_rel = "pred/" + id + ".uqt";
        write_tensor(Tensor::from_f64({static_cast<uint64_t>(cfg.mc_samples),
                                       static_cast<uint64_t>(K), 2},
                                      rows),
                     outdir / pred_rel);

        InstanceRecord rec;
        rec.id = id;
        rec.group = group;
        rec.truth_values = std::move(y);
        rec.prediction_path = pred_rel;
        man.instances.push_back(std::move(rec));
    }

    write_tensor(Tensor::from_f64({N, D}, features), outdir / "features.uqt");
    save_manifest(man, outdir / "manifest.json");
    write_meta(outdir, cfg, json{{"features_path", "features.uqt"},
                                 {"coefficients", A},
                                 {"intercepts", b}});
}

namespace {

// nested spheres: label 3 inside r_et, 1 up to r_tc, 2 up to r_wt
std::vector<uint8_t> sphere_labels(const std::array<uint64_t, 3>& vol,
                                   const std::array<double, 3>& center, double r_wt,
                                   double r_tc, double r_et) {
    std::vector<uint8_t> labels(vol[0] * vol[1] * vol[2], 0);
    size_t idx = 0;
    for (uint64_t p = 0; p < vol[0]; ++p)
        for (uint64_t q = 0; q < vol[1]; ++q)
            for (uint64_t s = 0; s < vol[2]; ++s, ++idx) {
                const double dp = static_cast<double>(p) - center[0];
                const double dq = static_cast<double>(q) - center[1];
                const double ds = static_cast<double>(s) - center[2];
                const double r = std::sqrt(dp * dp + dq * dq + ds * ds);
                if (r <= r_et) labels[idx] = 3;
                else if (r <= r_tc) labels[idx] = 1;
                else if (r <= r_wt) labels[idx] = 2;
            }
    return labels;
}

} // namespace

void gen_segmentation(const SynthConfig& cfg, const std::filesystem::path& outdir) {
    check_common(cfg);
    for (auto d : cfg.vol)
        if (d < 4 || d > 64)
            throw ValidationError("BadConfig: volume dims must be in [4,64]");
    std::filesystem::create_directories(outdir / "pred");
    std::filesystem::create_directories(outdir / "truth");

    const size_t N = cfg.m + cfg.l;
    const int C = 4; // background, necrotic core, edema, enhancing
    const size_t V = cfg.vol[0] * cfg.vol[1] * cfg.vol[2];
    const size_t T = static_cast<size_t>(cfg.mc_samples);

    EvalManifest man;
    man.task = TaskKind::Segmentation;
    man.class_count = C;
    man.class_names = {"background", "necrotic_core", "edema", "enhancing"};
    man.regions = {{"WT", {1, 2, 3}}, {"TC", {1, 3}}, {"ET", {3}}};
    man.measure = Measure::Entropy;
    man.normalization = NormMode::Bound;

    json radii_meta = json::array();
    for (size_t i = 0; i < N; ++i) {
        const int group = i < cfg.m ? 0 : 1;
        const size_t within = group == 0 ? i : i - cfg.m;
        Rng rng(Rng::derive(cfg.seed, i));

        const double min_dim = static_cast<double>(
            std::min({cfg.vol[0], cfg.vol[1], cfg.vol[2]}));
        const double r_wt = min_dim * (0.28 + 0.06 * rng.next_double());
        const double r_tc = 0.6 * r_wt;
        // group 1 carries a systematically smaller enhancing core
        const double et_scale = group == 1 ? std::max(0.0, 1.0 - cfg.group_shift) : 1.0;
        const double r_et = 0.35 * r_wt * et_scale;
        std::array<double, 3> center;
        for (size_t d = 0; d < 3; ++d)
            center[d] = static_cast<double>(cfg.vol[d]) * (0.4 + 0.2 * rng.next_double());

        const auto truth = sphere_labels(cfg.vol, center, r_wt, r_tc, r_et);

        // the synthetic predictor sees slightly perturbed radii plus
        // per-sample logit noise (noisier for the configured group)
        const double sigma = 0.8 + (group == 0 ? cfg.noise0 : cfg.noise1);
        const double rerr = 1.0 + 0.06 * rng.next_gaussian();
        const auto pred_base =
            sphere_labels(cfg.vol, center, r_wt * rerr, r_tc * rerr, r_et * rerr);

        std::vector<float> rows(T * static_cast<size_t>(C) * V);
        std::vector<double> logits(static_cast<size_t>(C));
        for (size_t t = 0; t < T; ++t)
            for (size_t v = 0; v < V; ++v) {
                for (int c = 0; c < C; ++c)
                    logits[static_cast<size_t>(c)] =
                        (pred_base[v] == c ? 4.0 : 0.0) + sigma * rng.next_gaussian();
                const auto p = softmax(logits);
                for (int c = 0; c < C; ++c)
                    rows[(t * static_cast<size_t>(C) + static_cast<size_t>(c)) * V + v] =
                        static_cast<float>(p[static_cast<size_t>(c)]);
            }

        const std::string id = instance_id(group, within);
        const std::string truth_rel = "truth/" + id + ".uqt";
        const std::string pred_rel = "pred/" + id + ".uqt";
        write_tensor(Tensor::from_u8({cfg.vol[0], cfg.vol[1], cfg.vol[2]}, truth),
                     outdir / truth_rel);
        write_tensor(Tensor{Dtype::F32,
                            {static_cast<uint64_t>(T), static_cast<uint64_t>(C), cfg.vol[0],
                             cfg.vol[1], cfg.vol[2]},
                            [&] {
                                std::vector<uint8_t> bytes(rows.size() * 4);
                                std::memcpy(bytes.data(), rows.data(), bytes.size());
                                return bytes;
                            }()},
                     outdir / pred_rel);

        InstanceRecord rec;
        rec.id = id;
        rec.group = group;
        rec.truth_path = truth_rel;
        rec.prediction_path = pred_rel;
        man.instances.push_back(std::move(rec));
        radii_meta.push_back({{"id", id}, {"r_wt", r_wt}, {"r_tc", r_tc}, {"r_et", r_et}});
    }

    save_manifest(man, outdir / "manifest.json");
    write_meta(outdir, cfg, json{{"radii", radii_meta}});
}

void generate(const SynthConfig& cfg, const std::filesystem::path& outdir) {
    switch (cfg.task) {
        case TaskKind::Classification: gen_classification(cfg, outdir); return;
        case TaskKind::Segmentation: gen_segmentation(cfg, outdir); return;
        case TaskKind::Regression: gen_regression(cfg, outdir); return;
    }
    throw ValidationError("BadConfig: unknown task");
}

ToyDataset dataset_from_manifest(const EvalManifest& manifest,
                                 const std::filesystem::path& features_path) {
    if (manifest.task == TaskKind::Segmentation)
        throw ValidationError("toy trainer supports classification and regression only");
    const Tensor f = read_tensor(features_path);
    if (f.dims.size() != 2 || f.dims[0] != manifest.instances.size())
        throw ValidationError("features tensor must be N x dim with N = instance count");

    ToyDataset ds;
    ds.classification = manifest.task == TaskKind::Classification;
    ds.n = manifest.instances.size();
    ds.dim = f.dims[1];
    ds.class_count = manifest.class_count;
    ds.targets = manifest.target_names.size();
    ds.x.resize(ds.n * ds.dim);
    for (size_t i = 0; i < ds.x.size(); ++i) ds.x[i] = f.at(i);
    for (const auto& rec : manifest.instances) {
        ds.group.push_back(rec.group);
        ds.ids.push_back(rec.id);
        if (ds.classification) ds.y_class.push_back(rec.truth_class);
        else ds.y_reg.insert(ds.y_reg.end(), rec.truth_values.begin(), rec.truth_values.end());
    }
    return ds;
}

} // namespace uqfair
