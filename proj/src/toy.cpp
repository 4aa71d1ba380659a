#include "uqfair/toy.hpp"
#include "uqfair/errors.hpp"
#include "uqfair/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

using nlohmann::json;

namespace uqfair {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Baseline: return "baseline";
        case Strategy::Balanced: return "balanced";
        case Strategy::GroupDro: return "groupdro";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "baseline") return Strategy::Baseline;
    if (s == "balanced") return Strategy::Balanced;
    if (s == "groupdro") return Strategy::GroupDro;
    throw ValidationError("unknown strategy: " + s);
}

ToyDataset ToyDataset::subset(const std::vector<size_t>& indices) const {
    ToyDataset out;
    out.classification = classification;
    out.dim = dim;
    out.class_count = class_count;
    out.targets = targets;
    out.n = indices.size();
    for (size_t i : indices) {
        out.x.insert(out.x.end(), x.begin() + static_cast<long>(i * dim),
                     x.begin() + static_cast<long>((i + 1) * dim));
        if (classification) out.y_class.push_back(y_class[i]);
        else
            out.y_reg.insert(out.y_reg.end(), y_reg.begin() + static_cast<long>(i * targets),
                             y_reg.begin() + static_cast<long>((i + 1) * targets));
        out.group.push_back(group[i]);
        if (!ids.empty()) out.ids.push_back(ids[i]);
    }
    return out;
}

ToyDataset balanced_resample(const ToyDataset& ds, uint64_t seed) {
    Rng rng(Rng::derive(seed, 0xBA1A));
    // cells keyed by class for classification, single cell for regression
    std::map<int, std::array<std::vector<size_t>, 2>> cells;
    for (size_t i = 0; i < ds.n; ++i) {
        const int key = ds.classification ? ds.y_class[i] : 0;
        cells[key][static_cast<size_t>(ds.group[i])].push_back(i);
    }
    std::vector<size_t> selected;
    for (auto& [cls, groups] : cells) {
        const size_t m = std::min(groups[0].size(), groups[1].size());
        if (m == 0)
            throw ValidationError("EmptyCell: class " + std::to_string(cls) +
                                  " has no instances in one group");
        for (auto& idx : groups) {
            // Fisher-Yates, keep first m
            for (size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[rng.next_below(i)]);
            selected.insert(selected.end(), idx.begin(), idx.begin() + static_cast<long>(m));
        }
    }
    for (size_t i = selected.size(); i > 1; --i)
        std::swap(selected[i - 1], selected[rng.next_below(i)]);
    return ds.subset(selected);
}

GroupWeights groupdro_step(const GroupWeights& q, const std::array<double, 2>& losses,
                           double eta_q) {
    for (double l : losses)
        if (!std::isfinite(l)) throw ValidationError("NonFiniteLoss in groupdro_step");
    // shift by the max loss: exact invariance to a common loss offset
    const double shift = std::max(losses[0], losses[1]);
    GroupWeights out;
    double z = 0.0;
    for (size_t g = 0; g < 2; ++g) {
        out.q[g] = q.q[g] * std::exp(eta_q * (losses[g] - shift));
        z += out.q[g];
    }
    for (auto& v : out.q) v /= z;
    return out;
}

namespace {

struct ForwardCache {
    std::vector<double> z1, dropped, out; // hidden, hidden, out_dim
};

void forward(const ToyModel& m, const double* x, const uint8_t* mask, ForwardCache& fc) {
    const double keep_scale = m.dropout_p > 0.0 ? 1.0 / (1.0 - m.dropout_p) : 1.0;
    fc.z1.assign(m.hidden, 0.0);
    fc.dropped.assign(m.hidden, 0.0);
    fc.out.assign(m.out_dim, 0.0);
    for (size_t h = 0; h < m.hidden; ++h) {
        double z = m.b1[h];
        for (size_t d = 0; d < m.in_dim; ++d) z += m.w1[h * m.in_dim + d] * x[d];
        fc.z1[h] = z;
        const double a = z > 0.0 ? z : 0.0;
        fc.dropped[h] = mask ? (mask[h] ? a * keep_scale : 0.0) : a;
    }
    for (size_t j = 0; j < m.out_dim; ++j) {
        double o = m.b2[j];
        for (size_t h = 0; h < m.hidden; ++h) o += m.w2[j * m.hidden + h] * fc.dropped[h];
        fc.out[j] = o;
    }
}

// loss of one sample plus dL/d(out); returns loss
double loss_and_grad_out(const ToyModel& m, const ToyDataset& ds, size_t i,
                         const ForwardCache& fc, std::vector<double>* gout) {
    if (m.classifier) {
        const double mx = *std::max_element(fc.out.begin(), fc.out.end());
        double z = 0.0;
        std::vector<double> p(m.out_dim);
        for (size_t j = 0; j < m.out_dim; ++j) {
            p[j] = std::exp(fc.out[j] - mx);
            z += p[j];
        }
        for (auto& v : p) v /= z;
        const int y = ds.y_class[i];
        const double loss = -std::log(std::max(p[static_cast<size_t>(y)], 1e-300));
        if (gout) {
            gout->assign(m.out_dim, 0.0);
            for (size_t j = 0; j < m.out_dim; ++j) (*gout)[j] = p[j];
            (*gout)[static_cast<size_t>(y)] -= 1.0;
        }
        return loss;
    }
    double loss = 0.0;
    if (gout) gout->assign(m.out_dim, 0.0);
    for (size_t k = 0; k < m.targets; ++k) {
        const double mu = fc.out[2 * k], s = fc.out[2 * k + 1];
        const double y = ds.y_reg[i * m.targets + k];
        const double inv_var = std::exp(-s);
        const double err = y - mu;
        loss += 0.5 * (s + err * err * inv_var);
        if (gout) {
            (*gout)[2 * k] = -err * inv_var;
            (*gout)[2 * k + 1] = 0.5 * (1.0 - err * err * inv_var);
        }
    }
    return loss;
}

} // namespace

double toy_loss(const ToyModel& m, const ToyDataset& ds, const std::vector<size_t>& batch,
                const std::vector<uint8_t>& dropout_mask, const std::vector<double>& weights,
                std::vector<double>* per_sample_loss) {
    if (batch.empty()) throw ValidationError("empty batch");
    ForwardCache fc;
    double total = 0.0;
    if (per_sample_loss) per_sample_loss->resize(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) {
        const uint8_t* mask = dropout_mask.empty() ? nullptr : &dropout_mask[b * m.hidden];
        forward(m, &ds.x[batch[b] * ds.dim], mask, fc);
        const double l = loss_and_grad_out(m, ds, batch[b], fc, nullptr);
        if (per_sample_loss) (*per_sample_loss)[b] = l;
        total += weights[b] * l;
    }
    return total;
}

Gradients toy_gradients(const ToyModel& m, const ToyDataset& ds,
                        const std::vector<size_t>& batch,
                        const std::vector<uint8_t>& dropout_mask,
                        const std::vector<double>& weights, double* loss_out) {
    if (batch.empty()) throw ValidationError("empty batch");
    Gradients g;
    g.w1.assign(m.w1.size(), 0.0);
    g.b1.assign(m.b1.size(), 0.0);
    g.w2.assign(m.w2.size(), 0.0);
    g.b2.assign(m.b2.size(), 0.0);
    const double keep_scale = m.dropout_p > 0.0 ? 1.0 / (1.0 - m.dropout_p) : 1.0;

    ForwardCache fc;
    std::vector<double> gout, gz1(m.hidden);
    double total = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
        const size_t i = batch[b];
        const uint8_t* mask = dropout_mask.empty() ? nullptr : &dropout_mask[b * m.hidden];
        const double* x = &ds.x[i * ds.dim];
        forward(m, x, mask, fc);
        total += weights[b] * loss_and_grad_out(m, ds, i, fc, &gout);

        for (size_t h = 0; h < m.hidden; ++h) {
            double gd = 0.0;
            for (size_t j = 0; j < m.out_dim; ++j) gd += m.w2[j * m.hidden + h] * gout[j];
            const double pass = (mask ? (mask[h] ? keep_scale : 0.0) : 1.0);
            gz1[h] = fc.z1[h] > 0.0 ? gd * pass : 0.0;
        }
        const double w = weights[b];
        for (size_t j = 0; j < m.out_dim; ++j) {
            const double go = w * gout[j];
            g.b2[j] += go;
            for (size_t h = 0; h < m.hidden; ++h) g.w2[j * m.hidden + h] += go * fc.dropped[h];
        }
        for (size_t h = 0; h < m.hidden; ++h) {
            const double gz = w * gz1[h];
            g.b1[h] += gz;
            for (size_t d = 0; d < m.in_dim; ++d) g.w1[h * m.in_dim + d] += gz * x[d];
        }
    }
    if (loss_out) *loss_out = total;
    return g;
}

static ToyModel init_model(const ToyDataset& ds, const TrainConfig& cfg, Rng& rng) {
    ToyModel m;
    m.in_dim = ds.dim;
    m.hidden = static_cast<size_t>(cfg.hidden);
    m.classifier = ds.classification;
    m.targets = ds.targets;
    m.out_dim = ds.classification ? static_cast<size_t>(ds.class_count) : 2 * ds.targets;
    m.dropout_p = cfg.dropout_p;
    auto init = [&](std::vector<double>& w, size_t fan_in, size_t fan_out, size_t count) {
        const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        w.resize(count);
        for (auto& v : w) v = (2.0 * rng.next_double() - 1.0) * r;
    };
    init(m.w1, m.in_dim, m.hidden, m.hidden * m.in_dim);
    m.b1.assign(m.hidden, 0.0);
    init(m.w2, m.hidden, m.out_dim, m.out_dim * m.hidden);
    m.b2.assign(m.out_dim, 0.0);
    return m;
}

TrainResult train_toy(const ToyDataset& ds_in, const TrainConfig& cfg) {
    if (ds_in.n == 0) throw ValidationError("empty training set");
    const ToyDataset ds =
        cfg.strategy == Strategy::Balanced ? balanced_resample(ds_in, cfg.seed) : ds_in;

    TrainResult result;
    for (int e = 0; e < cfg.ensemble_size; ++e) {
        Rng rng(Rng::derive(cfg.seed + static_cast<uint64_t>(e), 0x70A1));
        ToyModel model = init_model(ds, cfg, rng);
        GroupWeights q;

        std::vector<size_t> perm(ds.n);
        std::iota(perm.begin(), perm.end(), size_t{0});
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[rng.next_below(i)]);
            for (size_t start = 0; start < ds.n; start += static_cast<size_t>(cfg.batch_size)) {
                const size_t end = std::min(ds.n, start + static_cast<size_t>(cfg.batch_size));
                const std::vector<size_t> batch(perm.begin() + static_cast<long>(start),
                                                perm.begin() + static_cast<long>(end));
                const size_t B = batch.size();

                std::vector<uint8_t> masks;
                if (model.dropout_p > 0.0) {
                    masks.resize(B * model.hidden);
                    for (auto& mk : masks) mk = rng.next_double() >= model.dropout_p ? 1 : 0;
                }

                std::vector<double> weights(B, 1.0 / static_cast<double>(B));
                if (cfg.strategy == Strategy::GroupDro) {
                    std::vector<double> losses;
                    toy_loss(model, ds, batch, masks, weights, &losses);
                    std::array<double, 2> group_loss{0.0, 0.0};
                    std::array<size_t, 2> group_n{0, 0};
                    for (size_t b = 0; b < B; ++b) {
                        const auto g = static_cast<size_t>(ds.group[batch[b]]);
                        group_loss[g] += losses[b];
                        ++group_n[g];
                    }
                    for (size_t g = 0; g < 2; ++g)
                        if (group_n[g]) group_loss[g] /= static_cast<double>(group_n[g]);
                    q = groupdro_step(q, group_loss, cfg.eta_q);
                    double wsum = 0.0;
                    for (size_t b = 0; b < B; ++b) {
                        const auto g = static_cast<size_t>(ds.group[batch[b]]);
                        weights[b] = group_n[g] ? q.q[g] / static_cast<double>(group_n[g]) : 0.0;
                        wsum += weights[b];
                    }
                    for (auto& w : weights) w /= wsum;
                }

                double loss = 0.0;
                const Gradients g = toy_gradients(model, ds, batch, masks, weights, &loss);
                if (!std::isfinite(loss))
                    throw ValidationError("DivergedLoss at epoch " + std::to_string(epoch) +
                                          " batch " + std::to_string(start / cfg.batch_size));
                auto step = [&](std::vector<double>& w, const std::vector<double>& gw) {
                    for (size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * gw[i];
                };
                step(model.w1, g.w1);
                step(model.b1, g.b1);
                step(model.w2, g.w2);
                step(model.b2, g.b2);
            }
        }
        result.models.push_back(std::move(model));
        result.final_q.push_back(q);
    }
    return result;
}

Tensor mc_predict_instance(const std::vector<ToyModel>& ensemble,
                           std::span<const double> features, const TrainConfig& cfg,
                           uint64_t instance_index) {
    const size_t E = ensemble.size();
    const size_t S = static_cast<size_t>(cfg.dropout_samples);
    const size_t T = E * S;
    const ToyModel& m0 = ensemble.front();
    const size_t out_cols = m0.classifier ? m0.out_dim : m0.targets * 2;
    std::vector<double> rows(T * out_cols);

    ForwardCache fc;
    std::vector<uint8_t> mask;
    for (size_t e = 0; e < E; ++e) {
        const ToyModel& m = ensemble[e];
        Rng rng(Rng::derive(Rng::derive(cfg.seed + e, 0xDC), instance_index));
        for (size_t s = 0; s < S; ++s) {
            const uint8_t* mp = nullptr;
            if (m.dropout_p > 0.0) {
                mask.resize(m.hidden);
                for (auto& mk : mask) mk = rng.next_double() >= m.dropout_p ? 1 : 0;
                mp = mask.data();
            }
            forward(m, features.data(), mp, fc);
            double* row = &rows[(e * S + s) * out_cols];
            if (m.classifier) {
                const double mx = *std::max_element(fc.out.begin(), fc.out.end());
                double z = 0.0;
                for (size_t j = 0; j < m.out_dim; ++j) {
                    row[j] = std::exp(fc.out[j] - mx);
                    z += row[j];
                }
                for (size_t j = 0; j < m.out_dim; ++j) row[j] /= z;
            } else {
                for (size_t k = 0; k < m.targets; ++k) {
                    row[2 * k] = fc.out[2 * k];
                    row[2 * k + 1] = std::exp(fc.out[2 * k + 1]);
                }
            }
        }
    }
    if (m0.classifier) return Tensor::from_f64({T, out_cols}, rows);
    return Tensor::from_f64({T, m0.targets, 2}, rows);
}

// --- ensemble (de)serialization ---

static json model_to_json(const ToyModel& m) {
    return json{{"in_dim", m.in_dim},       {"hidden", m.hidden}, {"out_dim", m.out_dim},
                {"classifier", m.classifier}, {"targets", m.targets},
                {"dropout_p", m.dropout_p}, {"w1", m.w1},         {"b1", m.b1},
                {"w2", m.w2},               {"b2", m.b2}};
}

static ToyModel model_from_json(const json& j) {
    ToyModel m;
    m.in_dim = j.at("in_dim").get<size_t>();
    m.hidden = j.at("hidden").get<size_t>();
    m.out_dim = j.at("out_dim").get<size_t>();
    m.classifier = j.at("classifier").get<bool>();
    m.targets = j.at("targets").get<size_t>();
    m.dropout_p = j.at("dropout_p").get<double>();
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<std::vector<double>>();
    return m;
}

void save_ensemble(const TrainResult& r, const TrainConfig& cfg,
                   const std::string& manifest_path, const std::filesystem::path& path) {
    json j;
    j["config"] = {{"strategy", to_string(cfg.strategy)},
                   {"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"lr", cfg.lr},
                   {"eta_q", cfg.eta_q},
                   {"ensemble_size", cfg.ensemble_size},
                   {"dropout_samples", cfg.dropout_samples},
                   {"hidden", cfg.hidden},
                   {"dropout_p", cfg.dropout_p},
                   {"seed", cfg.seed}};
    j["manifest"] = manifest_path;
    j["members"] = json::array();
    for (const auto& m : r.models) j["members"].push_back(model_to_json(m));
    j["final_q"] = json::array();
    for (const auto& q : r.final_q) j["final_q"].push_back({q.q[0], q.q[1]});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write ensemble: " + path.string());
    out << j.dump(2) << "\n";
}

LoadedEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ensemble: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("ParseError in ensemble file: ") + e.what());
    }
    LoadedEnsemble le;
    const auto& c = j.at("config");
    le.cfg.strategy = strategy_from_string(c.at("strategy").get<std::string>());
    le.cfg.epochs = c.at("epochs").get<int>();
    le.cfg.batch_size = c.at("batch_size").get<int>();
    le.cfg.lr = c.at("lr").get<double>();
    le.cfg.eta_q = c.at("eta_q").get<double>();
    le.cfg.ensemble_size = c.at("ensemble_size").get<int>();
    le.cfg.dropout_samples = c.at("dropout_samples").get<int>();
    le.cfg.hidden = c.at("hidden").get<int>();
    le.cfg.dropout_p = c.at("dropout_p").get<double>();
    le.cfg.seed = c.at("seed").get<uint64_t>();
    le.manifest_path = j.at("manifest").get<std::string>();
    for (const auto& mj : j.at("members")) le.result.models.push_back(model_from_json(mj));
    for (const auto& qj : j.at("final_q")) {
        GroupWeights q;
        q.q[0] = qj.at(0).get<double>();
        q.q[1] = qj.at(1).get<double>();
        le.result.final_q.push_back(q);
    }
    return le;
}

} // namespace uqfair
