#include "uqfair/sweep.hpp"
#include "uqfair/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

namespace uqfair {

std::vector<double> threshold_grid(double step) {
    if (!(step > 0.0) || step > 100.0) throw ValidationError("BadStep: step must be in (0,100]");
    const long long k = std::llround(100.0 / step);
    if (k < 1 || std::fabs(static_cast<double>(k) * step - 100.0) > 1e-9)
        throw ValidationError("BadStep: step must divide 100");
    std::vector<double> taus(static_cast<size_t>(k) + 1);
    for (long long i = 0; i <= k; ++i) taus[static_cast<size_t>(i)] = 100.0 - static_cast<double>(i) * step;
    taus.front() = 100.0;
    taus.back() = 0.0;
    return taus;
}

Mask filter_retained(std::span<const double> normalized, double tau) {
    Mask m(normalized.size());
    for (size_t i = 0; i < normalized.size(); ++i) m[i] = normalized[i] <= tau ? 1 : 0;
    return m;
}

std::optional<double> fairness_gap(const MetricValue& em0, const MetricValue& em1) {
    if (!em0.value || !em1.value) return std::nullopt;
    return std::fabs(*em0.value - *em1.value);
}

namespace {

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const int t = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(static_cast<size_t>(t));
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

double resolve_bound_max(const EvalManifest& m) {
    if (m.bound_max) {
        if (*m.bound_max <= 0.0) throw ValidationError("BadBound: bound_max must be > 0");
        return *m.bound_max;
    }
    if (m.measure == Measure::Entropy && m.class_count >= 2)
        return std::log(static_cast<double>(m.class_count));
    throw ValidationError("BadBound: bound normalization needs bound_max for this measure");
}

std::vector<double> apply_normalization(const EvalManifest& m, std::vector<double> raw) {
    if (m.normalization == NormMode::Bound)
        return normalize(std::move(raw), m.measure, NormMode::Bound, resolve_bound_max(m)).normalized;
    return normalize(std::move(raw), m.measure, NormMode::Minmax).normalized;
}

void fill_fg(FairnessCurve& c) {
    c.fg.resize(c.taus.size());
    for (size_t i = 0; i < c.taus.size(); ++i) {
        if (c.em_d0[i] && c.em_d1[i])
            c.fg[i] = std::fabs(*c.em_d0[i] - *c.em_d1[i]);
    }
}

FairnessCurve make_curve(std::string metric, std::string scope, bool error_like,
                         const std::vector<double>& taus) {
    FairnessCurve c;
    c.metric = std::move(metric);
    c.scope = std::move(scope);
    c.error_like = error_like;
    c.taus = taus;
    const size_t n = taus.size();
    c.em_d0.resize(n);
    c.em_d1.resize(n);
    c.em_all.resize(n);
    c.n0.assign(n, 0);
    c.n1.assign(n, 0);
    return c;
}

// ---------------- classification ----------------

struct ClsStats {
    int group = 0, truth = 0, pred = 0;
    std::vector<double> mean_probs;
    double raw = 0.0;
};

SweepResult sweep_classification(const EvalManifest& m, const std::vector<double>& grid,
                                 int threads) {
    const size_t N = m.instances.size();
    const size_t C = static_cast<size_t>(m.class_count);
    std::vector<ClsStats> stats(N);
    parallel_for(N, threads, [&](size_t i) {
        const auto& inst = m.instances[i];
        const McPredictions mc = load_predictions(m, inst);
        ClsStats s;
        s.group = inst.group;
        s.truth = inst.truth_class;
        s.mean_probs = predictive_mean(mc.probs, mc.T, mc.C);
        s.pred = argmax_class(s.mean_probs);
        switch (m.measure) {
            case Measure::Entropy: s.raw = entropy(s.mean_probs); break;
            case Measure::SampleVar: {
                double acc = 0.0;
                std::vector<double> col(mc.T);
                for (size_t c = 0; c < C; ++c) {
                    for (size_t t = 0; t < mc.T; ++t) col[t] = mc.probs[t * C + c];
                    acc += sample_variance(col);
                }
                s.raw = acc / static_cast<double>(C);
                break;
            }
            case Measure::TotalVar:
                throw ValidationError("total-var is not defined for classification");
        }
        stats[i] = std::move(s);
    });

    std::vector<double> raw(N);
    for (size_t i = 0; i < N; ++i) raw[i] = stats[i].raw;
    const std::vector<double> norm = apply_normalization(m, std::move(raw));

    std::vector<int> truth(N), pred(N), group(N);
    std::vector<double> flat_probs(N * C);
    for (size_t i = 0; i < N; ++i) {
        truth[i] = stats[i].truth;
        pred[i] = stats[i].pred;
        group[i] = stats[i].group;
        for (size_t c = 0; c < C; ++c) flat_probs[i * C + c] = stats[i].mean_probs[c];
    }

    SweepResult out;
    auto& curves = out.curves;
    curves.push_back(make_curve("accuracy", "overall", false, grid));
    curves.push_back(make_curve("balanced_accuracy", "overall", false, grid));
    curves.push_back(make_curve("macro_auc", "overall", false, grid));
    const size_t class_curve_base = curves.size();
    for (size_t c = 0; c < C; ++c) {
        const std::string name =
            c < m.class_names.size() ? m.class_names[c] : "class_" + std::to_string(c);
        curves.push_back(make_curve("class_accuracy", name, false, grid));
    }

    for (size_t ti = 0; ti < grid.size(); ++ti) {
        const double tau = grid[ti];
        const Mask retained = filter_retained(norm, tau);
        Mask r0(N, 0), r1(N, 0);
        size_t n0 = 0, n1 = 0;
        for (size_t i = 0; i < N; ++i) {
            if (!retained[i]) continue;
            if (group[i] == 0) {
                r0[i] = 1;
                ++n0;
            } else {
                r1[i] = 1;
                ++n1;
            }
        }
        for (auto& c : curves) {
            c.n0[ti] = n0;
            c.n1[ti] = n1;
        }
        auto put = [&](FairnessCurve& c, const MetricValue& v0, const MetricValue& v1,
                       const MetricValue& vall) {
            c.em_d0[ti] = v0.value;
            c.em_d1[ti] = v1.value;
            c.em_all[ti] = vall.value;
        };
        put(curves[0], accuracy(truth, pred, r0), accuracy(truth, pred, r1),
            accuracy(truth, pred, retained));
        put(curves[1], balanced_accuracy(truth, pred, r0, m.class_count),
            balanced_accuracy(truth, pred, r1, m.class_count),
            balanced_accuracy(truth, pred, retained, m.class_count));
        put(curves[2], macro_auc_ovr(truth, flat_probs, r0, m.class_count),
            macro_auc_ovr(truth, flat_probs, r1, m.class_count),
            macro_auc_ovr(truth, flat_probs, retained, m.class_count));
        for (size_t c = 0; c < C; ++c)
            put(curves[class_curve_base + c], per_class_accuracy(truth, pred, r0, static_cast<int>(c)),
                per_class_accuracy(truth, pred, r1, static_cast<int>(c)),
                per_class_accuracy(truth, pred, retained, static_cast<int>(c)));
    }
    for (auto& c : curves) fill_fg(c);
    return out;
}

// ---------------- regression ----------------

struct RegStats {
    int group = 0;
    std::vector<double> truth, pred, raw; // per target
};

SweepResult sweep_regression(const EvalManifest& m, const std::vector<double>& grid, int threads) {
    const size_t N = m.instances.size();
    const size_t K = m.target_names.size();
    std::vector<RegStats> stats(N);
    parallel_for(N, threads, [&](size_t i) {
        const auto& inst = m.instances[i];
        const McPredictions mc = load_predictions(m, inst);
        RegStats s;
        s.group = inst.group;
        s.truth = inst.truth_values;
        s.pred.resize(K);
        s.raw.resize(K);
        std::vector<double> means(mc.T);
        for (size_t k = 0; k < K; ++k) {
            for (size_t t = 0; t < mc.T; ++t) means[t] = mc.probs[(t * K + k) * 2];
            s.pred[k] = std::accumulate(means.begin(), means.end(), 0.0) /
                        static_cast<double>(mc.T);
            switch (m.measure) {
                case Measure::TotalVar: s.raw[k] = total_variance(mc, k); break;
                case Measure::SampleVar: s.raw[k] = sample_variance(means); break;
                case Measure::Entropy:
                    throw ValidationError("entropy is not defined for regression");
            }
        }
        stats[i] = std::move(s);
    });

    SweepResult out;
    for (size_t k = 0; k < K; ++k) {
        // each target normalized independently
        std::vector<double> raw(N);
        for (size_t i = 0; i < N; ++i) raw[i] = stats[i].raw[k];
        const std::vector<double> norm = apply_normalization(m, std::move(raw));

        std::vector<double> truth(N), pred(N);
        for (size_t i = 0; i < N; ++i) {
            truth[i] = stats[i].truth[k];
            pred[i] = stats[i].pred[k];
        }
        FairnessCurve c_rmse = make_curve("rmse", m.target_names[k], true, grid);
        FairnessCurve c_mae = make_curve("mae", m.target_names[k], true, grid);
        for (size_t ti = 0; ti < grid.size(); ++ti) {
            const Mask retained = filter_retained(norm, grid[ti]);
            Mask r0(N, 0), r1(N, 0);
            size_t n0 = 0, n1 = 0;
            for (size_t i = 0; i < N; ++i) {
                if (!retained[i]) continue;
                if (stats[i].group == 0) {
                    r0[i] = 1;
                    ++n0;
                } else {
                    r1[i] = 1;
                    ++n1;
                }
            }
            for (FairnessCurve* c : {&c_rmse, &c_mae}) {
                c->n0[ti] = n0;
                c->n1[ti] = n1;
            }
            c_rmse.em_d0[ti] = rmse(truth, pred, r0).value;
            c_rmse.em_d1[ti] = rmse(truth, pred, r1).value;
            c_rmse.em_all[ti] = rmse(truth, pred, retained).value;
            c_mae.em_d0[ti] = mae(truth, pred, r0).value;
            c_mae.em_d1[ti] = mae(truth, pred, r1).value;
            c_mae.em_all[ti] = mae(truth, pred, retained).value;
        }
        fill_fg(c_rmse);
        fill_fg(c_mae);
        out.curves.push_back(std::move(c_rmse));
        out.curves.push_back(std::move(c_mae));
    }
    return out;
}

// ---------------- segmentation ----------------

// Per-instance sufficient statistics: voxels sorted by normalized
// uncertainty with per-region prefix counts, so every tau reduces to a
// binary search plus O(1) lookups.
struct SegStats {
    int group = 0;
    size_t V = 0;
    std::vector<double> sorted_u;
    struct RegionPrefix {
        std::vector<uint32_t> P, G, I, TN;
    };
    std::vector<RegionPrefix> regions;
};

SweepResult sweep_segmentation(const EvalManifest& m, const std::vector<double>& grid,
                               int threads) {
    const size_t N = m.instances.size();
    const size_t R = m.regions.size();
    const size_t C = static_cast<size_t>(m.class_count);

    // phase 1: raw uncertainty + label maps per instance (parallel)
    std::vector<std::vector<double>> raws(N);
    std::vector<std::vector<int>> preds(N), truths(N);
    std::vector<int> groups(N);
    parallel_for(N, threads, [&](size_t i) {
        const auto& inst = m.instances[i];
        groups[i] = inst.group;
        std::array<uint64_t, 3> tdims{};
        truths[i] = load_label_map(m, inst, &tdims);
        const McPredictions mc = load_predictions(m, inst);
        if (mc.vol_dims != tdims)
            throw ValidationError("instance " + inst.id + ": prediction/truth volume mismatch");
        const size_t V = mc.voxel_count();
        preds[i].resize(V);
        raws[i].resize(V);
        std::vector<double> pvec(C);
        for (size_t v = 0; v < V; ++v) {
            for (size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (size_t t = 0; t < mc.T; ++t) acc += mc.probs[(t * C + c) * V + v];
                pvec[c] = acc / static_cast<double>(mc.T);
            }
            preds[i][v] = argmax_class(pvec);
            if (mc.precomputed) {
                raws[i][v] = mc.raw_unc[v];
            } else {
                switch (m.measure) {
                    case Measure::Entropy: raws[i][v] = entropy(pvec); break;
                    case Measure::SampleVar: {
                        double acc = 0.0;
                        std::vector<double> col(mc.T);
                        for (size_t c = 0; c < C; ++c) {
                            for (size_t t = 0; t < mc.T; ++t)
                                col[t] = mc.probs[(t * C + c) * V + v];
                            acc += sample_variance(col);
                        }
                        raws[i][v] = acc / static_cast<double>(C);
                        break;
                    }
                    case Measure::TotalVar:
                        throw ValidationError("total-var is not defined for segmentation");
                }
            }
        }
    });

    // normalization is joint over every voxel of the evaluation set
    std::vector<double> flat;
    for (const auto& r : raws) flat.insert(flat.end(), r.begin(), r.end());
    const std::vector<double> norm_flat = apply_normalization(m, std::move(flat));
    std::vector<std::vector<double>> norms(N);
    {
        size_t off = 0;
        for (size_t i = 0; i < N; ++i) {
            norms[i].assign(norm_flat.begin() + static_cast<long>(off),
                            norm_flat.begin() + static_cast<long>(off + raws[i].size()));
            off += raws[i].size();
        }
    }

    // phase 2: per-instance sorted order + region prefix sums (parallel)
    std::vector<SegStats> stats(N);
    parallel_for(N, threads, [&](size_t i) {
        SegStats s;
        s.group = groups[i];
        s.V = norms[i].size();
        std::vector<uint32_t> order(s.V);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
            return norms[i][a] != norms[i][b] ? norms[i][a] < norms[i][b] : a < b;
        });
        s.sorted_u.resize(s.V);
        for (size_t v = 0; v < s.V; ++v) s.sorted_u[v] = norms[i][order[v]];
        s.regions.resize(R);
        for (size_t r = 0; r < R; ++r) {
            const Mask pm = region_mask(preds[i], m.regions[r]);
            const Mask gm = region_mask(truths[i], m.regions[r]);
            auto& rp = s.regions[r];
            rp.P.assign(s.V + 1, 0);
            rp.G.assign(s.V + 1, 0);
            rp.I.assign(s.V + 1, 0);
            rp.TN.assign(s.V + 1, 0);
            for (size_t v = 0; v < s.V; ++v) {
                const uint32_t idx = order[v];
                rp.P[v + 1] = rp.P[v] + (pm[idx] ? 1 : 0);
                rp.G[v + 1] = rp.G[v] + (gm[idx] ? 1 : 0);
                rp.I[v + 1] = rp.I[v] + ((pm[idx] && gm[idx]) ? 1 : 0);
                rp.TN[v + 1] = rp.TN[v] + ((!pm[idx] && !gm[idx]) ? 1 : 0);
            }
        }
        stats[i] = std::move(s);
    });

    SweepResult out;
    for (size_t r = 0; r < R; ++r) {
        out.curves.push_back(make_curve("dice", m.regions[r].name, false, grid));
        out.curves.push_back(make_curve("ftp", m.regions[r].name, true, grid));
        out.curves.push_back(make_curve("ftn", m.regions[r].name, true, grid));
    }

    for (size_t ti = 0; ti < grid.size(); ++ti) {
        const double tau = grid[ti];
        // accumulators: [region][series 0=dice 1=ftp 2=ftn][group 0,1,2=all]
        std::vector<std::array<std::array<double, 3>, 3>> sums(
            R, {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}});
        std::array<size_t, 3> images{0, 0, 0};
        std::array<size_t, 2> voxels{0, 0};
        for (size_t i = 0; i < N; ++i) {
            const auto& s = stats[i];
            const size_t k = static_cast<size_t>(
                std::upper_bound(s.sorted_u.begin(), s.sorted_u.end(), tau) -
                s.sorted_u.begin());
            voxels[static_cast<size_t>(s.group)] += k;
            if (k == 0) continue; // image with no retained voxels drops out
            ++images[static_cast<size_t>(s.group)];
            ++images[2];
            for (size_t r = 0; r < R; ++r) {
                const auto& rp = s.regions[r];
                const double P = rp.P[k], G = rp.G[k], I = rp.I[k], TN = rp.TN[k];
                const double dice_v = (P + G == 0.0) ? 1.0 : 2.0 * I / (P + G);
                const double tp100 = rp.I[s.V], tn100 = rp.TN[s.V];
                const double ftp_v = tp100 > 0.0 ? (tp100 - I) / tp100 : 0.0;
                const double ftn_v = tn100 > 0.0 ? (tn100 - TN) / tn100 : 0.0;
                for (size_t g : {static_cast<size_t>(s.group), size_t{2}}) {
                    sums[r][0][g] += dice_v;
                    sums[r][1][g] += ftp_v;
                    sums[r][2][g] += ftn_v;
                }
            }
        }
        for (size_t r = 0; r < R; ++r) {
            for (size_t series = 0; series < 3; ++series) {
                FairnessCurve& c = out.curves[r * 3 + series];
                c.n0[ti] = voxels[0];
                c.n1[ti] = voxels[1];
                if (images[0]) c.em_d0[ti] = sums[r][series][0] / static_cast<double>(images[0]);
                if (images[1]) c.em_d1[ti] = sums[r][series][1] / static_cast<double>(images[1]);
                if (images[2]) c.em_all[ti] = sums[r][series][2] / static_cast<double>(images[2]);
            }
        }
    }
    for (auto& c : out.curves) fill_fg(c);

    for (size_t r = 0; r < R; ++r) {
        const auto& cd = out.curves[r * 3 + 0];
        const auto& cp = out.curves[r * 3 + 1];
        const auto& cn = out.curves[r * 3 + 2];
        QubratsEntry q;
        q.region = m.regions[r].name;
        q.d0 = qubrats_score(grid, cd.em_d0, cp.em_d0, cn.em_d0);
        q.d1 = qubrats_score(grid, cd.em_d1, cp.em_d1, cn.em_d1);
        q.all = qubrats_score(grid, cd.em_all, cp.em_all, cn.em_all);
        out.qubrats.push_back(std::move(q));
    }
    return out;
}

} // namespace

SweepResult sweep_curves(const EvalManifest& manifest, const std::vector<double>& grid,
                         int threads) {
    if (grid.empty()) throw ValidationError("empty threshold grid");
    switch (manifest.task) {
        case TaskKind::Classification: return sweep_classification(manifest, grid, threads);
        case TaskKind::Regression: return sweep_regression(manifest, grid, threads);
        case TaskKind::Segmentation: return sweep_segmentation(manifest, grid, threads);
    }
    throw ValidationError("unknown task");
}

BehaviorFlags desired_behavior_flags(const FairnessCurve& curve) {
    size_t defined = 0;
    for (const auto& v : curve.em_all) defined += v.has_value() ? 1 : 0;
    if (defined < 2) throw ValidationError("TooFewPoints: need >= 2 defined curve points");

    BehaviorFlags out;
    auto pairs = [&](const std::vector<std::optional<double>>& series, bool is_fg,
                     std::vector<uint8_t>& flags) {
        std::optional<double> prev;
        for (size_t i = 0; i < series.size(); ++i) {
            if (!series[i]) continue;
            if (prev) {
                bool ok;
                if (is_fg || curve.error_like)
                    ok = *series[i] <= *prev; // lower is better as tau decreases
                else
                    ok = *series[i] >= *prev;
                flags.push_back(ok ? 1 : 0);
            }
            prev = series[i];
        }
    };
    pairs(curve.fg, true, out.fg_improved);
    pairs(curve.em_d0, false, out.em_d0_improved);
    pairs(curve.em_d1, false, out.em_d1_improved);
    pairs(curve.em_all, false, out.em_all_improved);

    auto frac = [](const std::vector<uint8_t>& f) {
        if (f.empty()) return 1.0; // vacuously satisfied
        return static_cast<double>(std::accumulate(f.begin(), f.end(), size_t{0})) /
               static_cast<double>(f.size());
    };
    out.frac_fg = frac(out.fg_improved);
    out.frac_em_d0 = frac(out.em_d0_improved);
    out.frac_em_d1 = frac(out.em_d1_improved);
    out.frac_em_all = frac(out.em_all_improved);
    return out;
}

} // namespace uqfair
