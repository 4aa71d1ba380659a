#include "uqfair/uncertainty.hpp"
#include "uqfair/errors.hpp"

#include <algorithm>
#include <cmath>

namespace uqfair {

std::vector<double> predictive_mean(std::span<const double> probs, size_t T, size_t C) {
    if (T < 1 || probs.size() != T * C)
        throw ValidationError("predictive_mean: bad stack shape");
    std::vector<double> mean(C, 0.0);
    for (size_t t = 0; t < T; ++t)
        for (size_t c = 0; c < C; ++c) mean[c] += probs[t * C + c];
    for (auto& v : mean) v /= static_cast<double>(T);
    return mean;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v < -1e-9) throw ValidationError("entropy: negative probability");
        if (v > 0.0) h -= v * std::log(v);
    }
    return std::max(h, 0.0);
}

double sample_variance(std::span<const double> ys) {
    if (ys.empty()) throw ValidationError("sample_variance: empty");
    double s = 0.0, s2 = 0.0;
    for (double y : ys) {
        s += y;
        s2 += y * y;
    }
    const double n = static_cast<double>(ys.size());
    return std::max(s2 / n - (s / n) * (s / n), 0.0);
}

double total_variance(const McPredictions& mc, size_t target) {
    if (mc.task != TaskKind::Regression || target >= mc.K)
        throw ValidationError("total_variance: not a regression stack / bad target");
    std::vector<double> means(mc.T);
    double vhat_sum = 0.0;
    for (size_t t = 0; t < mc.T; ++t) {
        means[t] = mc.probs[(t * mc.K + target) * 2];
        const double vhat = mc.probs[(t * mc.K + target) * 2 + 1];
        if (vhat < 0.0) throw ValidationError("NegativeVariance: V-hat < 0");
        vhat_sum += vhat;
    }
    return sample_variance(means) + vhat_sum / static_cast<double>(mc.T);
}

UncertaintyScores normalize(std::vector<double> raw, Measure measure, NormMode mode,
                            std::optional<double> bound_max) {
    if (raw.empty()) throw ValidationError("normalize: empty input");
    for (double v : raw)
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("normalize: values must be finite and >= 0");

    UncertaintyScores out;
    out.measure = measure;
    out.mode = mode;
    out.normalized.resize(raw.size());
    if (mode == NormMode::Bound) {
        if (!bound_max || *bound_max <= 0.0)
            throw ValidationError("BadBound: bound mode requires positive bound_max");
        for (size_t i = 0; i < raw.size(); ++i)
            out.normalized[i] = std::min(100.0 * raw[i] / *bound_max, 100.0);
    } else {
        const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
        const double lo = *mn, hi = *mx;
        if (hi == lo) {
            std::fill(out.normalized.begin(), out.normalized.end(), 0.0);
        } else {
            for (size_t i = 0; i < raw.size(); ++i)
                out.normalized[i] =
                    std::clamp(100.0 * (raw[i] - lo) / (hi - lo), 0.0, 100.0);
        }
    }
    out.raw = std::move(raw);
    return out;
}

} // namespace uqfair
