#include "uqfair/metrics.hpp"
#include "uqfair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uqfair {

static void check_lengths(size_t a, size_t b, size_t r) {
    if (a != b || a != r) throw ValidationError("LengthMismatch");
}

MetricValue accuracy(std::span<const int> truth, std::span<const int> pred,
                     std::span<const uint8_t> retained) {
    check_lengths(truth.size(), pred.size(), retained.size());
    size_t n = 0, correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (!retained[i]) continue;
        ++n;
        correct += (truth[i] == pred[i]);
    }
    if (n == 0) return {};
    return {static_cast<double>(correct) / static_cast<double>(n), n};
}

MetricValue per_class_accuracy(std::span<const int> truth, std::span<const int> pred,
                               std::span<const uint8_t> retained, int cls) {
    check_lengths(truth.size(), pred.size(), retained.size());
    size_t n = 0, correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (!retained[i] || truth[i] != cls) continue;
        ++n;
        correct += (truth[i] == pred[i]);
    }
    if (n == 0) return {};
    return {static_cast<double>(correct) / static_cast<double>(n), n};
}

MetricValue balanced_accuracy(std::span<const int> truth, std::span<const int> pred,
                              std::span<const uint8_t> retained, int class_count) {
    check_lengths(truth.size(), pred.size(), retained.size());
    double sum = 0.0;
    size_t classes = 0, n_total = 0;
    for (int c = 0; c < class_count; ++c) {
        const MetricValue mv = per_class_accuracy(truth, pred, retained, c);
        if (!mv.value) continue; // class entirely filtered: skipped, not undefined
        sum += *mv.value;
        ++classes;
        n_total += mv.n_retained;
    }
    if (classes == 0) return {};
    return {sum / static_cast<double>(classes), n_total};
}

int argmax_class(std::span<const double> probs) {
    int best = 0;
    for (size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = static_cast<int>(c);
    return best;
}

// rank-sum AUC for one class: P(score_pos > score_neg) + 0.5 P(tie)
static std::optional<double> auc_one_class(const std::vector<std::pair<double, int>>& sorted_scores) {
    size_t n_pos = 0, n_neg = 0;
    for (const auto& [s, y] : sorted_scores) (y ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    // sum of positive ranks with midranks for ties
    double rank_sum = 0.0;
    size_t i = 0;
    const size_t n = sorted_scores.size();
    while (i < n) {
        size_t j = i;
        while (j < n && sorted_scores[j].first == sorted_scores[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (sorted_scores[k].second) rank_sum += midrank;
        i = j;
    }
    const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricValue macro_auc_ovr(std::span<const int> truth, std::span<const double> probs,
                          std::span<const uint8_t> retained, int class_count) {
    const size_t N = truth.size();
    if (retained.size() != N || probs.size() != N * static_cast<size_t>(class_count))
        throw ValidationError("LengthMismatch");

    double sum = 0.0;
    size_t classes = 0, n_ret = 0;
    for (size_t i = 0; i < N; ++i) n_ret += retained[i] ? 1 : 0;
    std::vector<std::pair<double, int>> scores;
    for (int c = 0; c < class_count; ++c) {
        scores.clear();
        for (size_t i = 0; i < N; ++i) {
            if (!retained[i]) continue;
            scores.emplace_back(probs[i * class_count + c], truth[i] == c ? 1 : 0);
        }
        std::sort(scores.begin(), scores.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (const auto auc = auc_one_class(scores)) {
            sum += *auc;
            ++classes;
        }
    }
    if (classes == 0) return {};
    return {sum / static_cast<double>(classes), n_ret};
}

Mask region_mask(std::span<const int> labels, const RegionDef& region) {
    Mask mask(labels.size(), 0);
    for (size_t i = 0; i < labels.size(); ++i)
        mask[i] = std::find(region.labels.begin(), region.labels.end(), labels[i]) !=
                          region.labels.end()
                      ? 1
                      : 0;
    return mask;
}

MetricValue dice(std::span<const uint8_t> pred_mask, std::span<const uint8_t> truth_mask,
                 std::span<const uint8_t> retained) {
    if (pred_mask.size() != truth_mask.size() || pred_mask.size() != retained.size())
        throw ValidationError("ShapeMismatch");
    size_t n = 0, p = 0, g = 0, both = 0;
    for (size_t i = 0; i < pred_mask.size(); ++i) {
        if (!retained[i]) continue;
        ++n;
        p += pred_mask[i] ? 1 : 0;
        g += truth_mask[i] ? 1 : 0;
        both += (pred_mask[i] && truth_mask[i]) ? 1 : 0;
    }
    if (n == 0) return {};
    if (p + g == 0) return {1.0, n}; // correctly predicted absence
    return {2.0 * static_cast<double>(both) / static_cast<double>(p + g), n};
}

std::pair<double, double> ftp_ftn(std::span<const uint8_t> pred_mask,
                                  std::span<const uint8_t> truth_mask,
                                  std::span<const uint8_t> retained) {
    if (pred_mask.size() != truth_mask.size() || pred_mask.size() != retained.size())
        throw ValidationError("ShapeMismatch");
    size_t tp100 = 0, tn100 = 0, tp_tau = 0, tn_tau = 0;
    for (size_t i = 0; i < pred_mask.size(); ++i) {
        const bool tp = pred_mask[i] && truth_mask[i];
        const bool tn = !pred_mask[i] && !truth_mask[i];
        tp100 += tp;
        tn100 += tn;
        if (retained[i]) {
            tp_tau += tp;
            tn_tau += tn;
        }
    }
    const double ftp = tp100 ? static_cast<double>(tp100 - tp_tau) / static_cast<double>(tp100) : 0.0;
    const double ftn = tn100 ? static_cast<double>(tn100 - tn_tau) / static_cast<double>(tn100) : 0.0;
    return {ftp, ftn};
}

// trapezoidal mean over defined consecutive grid segments
static std::optional<double> trapezoid_mean(std::span<const double> taus,
                                            std::span<const std::optional<double>> ys) {
    double area = 0.0, width = 0.0;
    for (size_t i = 0; i + 1 < taus.size(); ++i) {
        if (!ys[i] || !ys[i + 1]) continue;
        const double w = std::fabs(taus[i] - taus[i + 1]);
        area += 0.5 * (*ys[i] + *ys[i + 1]) * w;
        width += w;
    }
    if (width == 0.0) return std::nullopt;
    return area / width;
}

std::optional<double> qubrats_score(std::span<const double> taus,
                                    std::span<const std::optional<double>> dice_curve,
                                    std::span<const std::optional<double>> ftp_curve,
                                    std::span<const std::optional<double>> ftn_curve) {
    if (dice_curve.size() != taus.size() || ftp_curve.size() != taus.size() ||
        ftn_curve.size() != taus.size())
        throw ValidationError("GridMismatch");
    const auto d = trapezoid_mean(taus, dice_curve);
    const auto p = trapezoid_mean(taus, ftp_curve);
    const auto n = trapezoid_mean(taus, ftn_curve);
    if (!d || !p || !n) return std::nullopt;
    return 100.0 * (*d + (1.0 - *p) + (1.0 - *n)) / 3.0;
}

MetricValue rmse(std::span<const double> truth, std::span<const double> pred,
                 std::span<const uint8_t> retained) {
    check_lengths(truth.size(), pred.size(), retained.size());
    size_t n = 0;
    double se = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (!retained[i]) continue;
        ++n;
        const double e = pred[i] - truth[i];
        se += e * e;
    }
    if (n == 0) return {};
    return {std::sqrt(se / static_cast<double>(n)), n};
}

MetricValue mae(std::span<const double> truth, std::span<const double> pred,
                std::span<const uint8_t> retained) {
    check_lengths(truth.size(), pred.size(), retained.size());
    size_t n = 0;
    double ae = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (!retained[i]) continue;
        ++n;
        ae += std::fabs(pred[i] - truth[i]);
    }
    if (n == 0) return {};
    return {ae / static_cast<double>(n), n};
}

} // namespace uqfair
