#include "uqfair/errors.hpp"
#include "uqfair/manifest.hpp"
#include "uqfair/report.hpp"
#include "uqfair/sweep.hpp"
#include "uqfair/synth.hpp"
#include "uqfair/toy.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace uqfair;

namespace {

int log_level() {
    const char* env = std::getenv("UQFAIR_LOG");
    if (!env) return 0;
    const std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (auto& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return out;
}

void run_evaluate(const std::string& manifest_path, const std::string& out_dir, double tau_step,
                  int threads, const std::string& measure, const std::string& normalization,
                  double bound_max) {
    EvalManifest m = load_manifest(manifest_path, /*require_predictions=*/true);
    if (!measure.empty()) m.measure = measure_from_string(measure);
    if (!normalization.empty()) m.normalization = norm_from_string(normalization);
    if (bound_max > 0.0) m.bound_max = bound_max;

    const auto grid = threshold_grid(tau_step);
    info("sweeping " + std::to_string(grid.size()) + " thresholds over " +
         std::to_string(m.instances.size()) + " instances");
    const SweepResult result = sweep_curves(m, grid, threads);

    fs::create_directories(out_dir);
    emit_curves_csv(result, fs::path(out_dir) / "curves.csv");
    emit_summary_json(result, fs::path(out_dir) / "summary.json");
    for (const auto& c : result.curves) {
        try {
            emit_svg(c, fs::path(out_dir) / (sanitize(c.metric) + "_" + sanitize(c.scope) + ".svg"));
        } catch (const ValidationError&) {
            // curve with too few defined points: no chart
        }
    }
    info("wrote " + out_dir);
}

void run_train(const std::string& manifest_path, const std::string& features,
               const std::string& out_dir, const TrainConfig& cfg) {
    const EvalManifest m = load_manifest(manifest_path);
    const fs::path feat = features.empty() ? m.base_dir / "features.uqt" : fs::path(features);
    const ToyDataset ds = dataset_from_manifest(m, feat);
    info("training " + to_string(cfg.strategy) + " on " + std::to_string(ds.n) + " instances");
    const TrainResult r = train_toy(ds, cfg);
    fs::create_directories(out_dir);
    save_ensemble(r, cfg, fs::absolute(manifest_path).string(), fs::path(out_dir) / "models.json");
    info("wrote " + out_dir + "/models.json");
}

void run_predict(const std::string& models_path, const std::string& manifest_path,
                 const std::string& features, const std::string& out_dir) {
    fs::path mp(models_path);
    if (fs::is_directory(mp)) mp /= "models.json";
    const LoadedEnsemble le = load_ensemble(mp);
    const std::string man_path = manifest_path.empty() ? le.manifest_path : manifest_path;
    EvalManifest m = load_manifest(man_path);
    const fs::path feat = features.empty() ? m.base_dir / "features.uqt" : fs::path(features);
    const Tensor f = read_tensor(feat);
    if (f.dims.size() != 2 || f.dims[0] != m.instances.size())
        throw ValidationError("features tensor must be N x dim with N = instance count");
    const size_t D = f.dims[1];

    fs::create_directories(fs::path(out_dir) / "pred");
    std::vector<double> x(D);
    for (size_t i = 0; i < m.instances.size(); ++i) {
        for (size_t d = 0; d < D; ++d) x[d] = f.at(i * D + d);
        const Tensor t = mc_predict_instance(le.result.models, x, le.cfg, i);
        const std::string rel = "pred/" + m.instances[i].id + ".uqt";
        write_tensor(t, fs::path(out_dir) / rel);
        m.instances[i].prediction_path = rel;
        m.instances[i].uncertainty_path.clear();
    }
    if (m.task == TaskKind::Regression) {
        m.measure = Measure::TotalVar;
        m.normalization = NormMode::Minmax;
    }
    save_manifest(m, fs::path(out_dir) / "manifest.json");
    info("wrote " + out_dir);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uqfair: fairness evaluation of uncertainty-filtered predictions"};
    app.require_subcommand(1);

    // gen-synth
    SynthConfig scfg;
    std::string gen_task = "classification", gen_out;
    std::vector<uint64_t> gen_vol;
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
    gen->add_option("--task", gen_task, "classification|segmentation|regression");
    gen->add_option("--m", scfg.m, "group-0 instance count");
    gen->add_option("--l", scfg.l, "group-1 instance count");
    gen->add_option("--classes", scfg.classes, "class count (classification)");
    gen->add_option("--targets", scfg.targets, "target count (regression)");
    gen->add_option("--dim", scfg.dim, "feature dimension");
    gen->add_option("--shift", scfg.group_shift, "group-1 feature shift / ET shrink");
    gen->add_option("--noise0", scfg.noise0, "group-0 noise scale");
    gen->add_option("--noise1", scfg.noise1, "group-1 noise scale");
    gen->add_option("--vol", gen_vol, "segmentation volume dims P Q S")->expected(3);
    gen->add_option("--mc-samples", scfg.mc_samples, "MC samples T in emitted dumps");
    gen->add_option("--seed", scfg.seed, "PRNG seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    // train-toy
    TrainConfig tcfg;
    std::string train_manifest, train_features, train_out, train_strategy = "baseline";
    auto* train = app.add_subcommand("train-toy", "train the toy MLP ensemble");
    train->add_option("--manifest", train_manifest)->required();
    train->add_option("--features", train_features, "features tensor (default: <manifest dir>/features.uqt)");
    train->add_option("--strategy", train_strategy, "baseline|balanced|groupdro");
    train->add_option("--epochs", tcfg.epochs);
    train->add_option("--batch-size", tcfg.batch_size);
    train->add_option("--lr", tcfg.lr);
    train->add_option("--eta-q", tcfg.eta_q);
    train->add_option("--ensemble", tcfg.ensemble_size, "ensemble size E");
    train->add_option("--dropout-samples", tcfg.dropout_samples, "MC dropout samples S per net");
    train->add_option("--hidden", tcfg.hidden);
    train->add_option("--dropout-p", tcfg.dropout_p);
    train->add_option("--seed", tcfg.seed);
    train->add_option("--out", train_out)->required();

    // predict-toy
    std::string pred_models, pred_manifest, pred_features, pred_out;
    auto* pred = app.add_subcommand("predict-toy", "emit MC prediction dumps from a trained ensemble");
    pred->add_option("--models", pred_models)->required();
    pred->add_option("--manifest", pred_manifest, "defaults to the manifest used for training");
    pred->add_option("--features", pred_features);
    pred->add_option("--out", pred_out)->required();

    // evaluate
    std::string eval_manifest, eval_out, eval_measure, eval_norm;
    double tau_step = 1.0, eval_bound_max = 0.0;
    int threads = 1;
    auto* eval = app.add_subcommand("evaluate", "threshold sweep + fairness-gap curves");
    eval->add_option("--manifest", eval_manifest)->required();
    eval->add_option("--tau-step", tau_step, "threshold grid step (must divide 100)");
    eval->add_option("--threads", threads, "worker threads (results independent of N)");
    eval->add_option("--measure", eval_measure, "entropy|sample-var|total-var (overrides manifest)");
    eval->add_option("--normalization", eval_norm, "bound|minmax (overrides manifest)");
    eval->add_option("--bound-max", eval_bound_max, "bound-mode denominator override");
    eval->add_option("--out", eval_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints usage
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            scfg.task = task_from_string(gen_task);
            if (!gen_vol.empty()) scfg.vol = {gen_vol[0], gen_vol[1], gen_vol[2]};
            generate(scfg, gen_out);
        } else if (train->parsed()) {
            tcfg.strategy = strategy_from_string(train_strategy);
            run_train(train_manifest, train_features, train_out, tcfg);
        } else if (pred->parsed()) {
            run_predict(pred_models, pred_manifest, pred_features, pred_out);
        } else if (eval->parsed()) {
            run_evaluate(eval_manifest, eval_out, tau_step, threads, eval_measure, eval_norm,
                         eval_bound_max);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
