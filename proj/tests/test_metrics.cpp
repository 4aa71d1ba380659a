#include "uqfair/errors.hpp"
#include "uqfair/metrics.hpp"
#include "uqfair/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <optional>

using namespace uqfair;

static Mask all_true(size_t n) { return Mask(n, 1); }

TEST_CASE("accuracy") {
    const std::vector<int> t{0, 0, 1, 1}, p{0, 1, 1, 1};
    CHECK(*accuracy(t, t, all_true(4)).value == 1.0);
    CHECK(*accuracy(t, p, all_true(4)).value == doctest::Approx(0.75));
    const auto empty = accuracy(t, p, Mask(4, 0));
    CHECK(!empty.value);
    CHECK(empty.n_retained == 0);
    CHECK_THROWS_AS(accuracy(t, std::vector<int>{0}, all_true(4)), ValidationError);
}

TEST_CASE("per-class accuracy and the partition identity") {
    const std::vector<int> t{0, 0, 1, 1, 2}, p{0, 1, 1, 1, 0};
    CHECK(!per_class_accuracy(t, p, Mask(5, 0), 0).value);
    CHECK(*per_class_accuracy(t, p, all_true(5), 0).value == doctest::Approx(0.5));

    // instance-weighted mean of per-class accuracies equals overall accuracy
    Rng rng(17);
    for (int iter = 0; iter < 50; ++iter) {
        const size_t n = 3 + rng.next_below(60);
        std::vector<int> truth(n), pred(n);
        Mask retained(n);
        for (size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.next_below(4));
            pred[i] = static_cast<int>(rng.next_below(4));
            retained[i] = rng.next_double() < 0.7 ? 1 : 0;
        }
        const auto overall = accuracy(truth, pred, retained);
        double weighted = 0.0;
        size_t total = 0;
        for (int c = 0; c < 4; ++c) {
            const auto mv = per_class_accuracy(truth, pred, retained, c);
            if (mv.value) {
                weighted += *mv.value * static_cast<double>(mv.n_retained);
                total += mv.n_retained;
            }
        }
        if (overall.value) {
            CHECK(total == overall.n_retained);
            CHECK(weighted / static_cast<double>(total) ==
                  doctest::Approx(*overall.value).epsilon(1e-12));
        }
    }
}

TEST_CASE("balanced accuracy") {
    // recalls 1.0 (class 0) and 0.5 (class 1)
    const std::vector<int> t{0, 0, 1, 1}, p{0, 0, 1, 0};
    CHECK(*balanced_accuracy(t, p, all_true(4), 2).value == doctest::Approx(0.75));
    CHECK(*balanced_accuracy(t, t, all_true(4), 2).value == 1.0);
    // class 1 entirely filtered: mean over the remaining class only
    const Mask keep{1, 1, 0, 0};
    CHECK(*balanced_accuracy(t, p, keep, 2).value == 1.0);
}

// exhaustive pair enumeration oracle
static std::optional<double> brute_auc(const std::vector<int>& truth,
                                       const std::vector<double>& probs, const Mask& retained,
                                       int C) {
    double sum = 0.0;
    int classes = 0;
    for (int c = 0; c < C; ++c) {
        double wins = 0.0;
        size_t pairs = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (!retained[i] || truth[i] != c) continue;
            for (size_t j = 0; j < truth.size(); ++j) {
                if (!retained[j] || truth[j] == c) continue;
                ++pairs;
                const double si = probs[i * static_cast<size_t>(C) + static_cast<size_t>(c)];
                const double sj = probs[j * static_cast<size_t>(C) + static_cast<size_t>(c)];
                if (si > sj) wins += 1.0;
                else if (si == sj) wins += 0.5;
            }
        }
        if (pairs) {
            sum += wins / static_cast<double>(pairs);
            ++classes;
        }
    }
    if (!classes) return std::nullopt;
    return sum / classes;
}

TEST_CASE("macro AUC anchors") {
    // binary: class-1 scores; perfectly separated
    const std::vector<int> t{1, 1, 0, 0};
    const std::vector<double> sep{0.1, 0.9, 0.2, 0.8, 0.7, 0.3, 0.6, 0.4};
    CHECK(*macro_auc_ovr(t, sep, all_true(4), 2).value == 1.0);

    const std::vector<double> anti{0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.4, 0.6};
    CHECK(*macro_auc_ovr(t, anti, all_true(4), 2).value == 0.0);

    // pos {0.9, 0.5} vs neg {0.5, 0.1}: (1 + 0.5 + 1 + 1)/4, one-sided
    const std::vector<int> t2{1, 1, 0, 0};
    const std::vector<double> mix{0.1, 0.9, 0.5, 0.5, 0.5, 0.5, 0.9, 0.1};
    // restrict to the positive class column by using only class 1's AUC:
    // class 0's is symmetric here, so macro = 0.875 as well
    CHECK(*macro_auc_ovr(t2, mix, all_true(4), 2).value == doctest::Approx(0.875));
}

TEST_CASE("rank-sum AUC equals brute-force pair enumeration (property)") {
    Rng rng(23);
    for (int iter = 0; iter < 40; ++iter) {
        const size_t n = 4 + rng.next_below(197);
        const int C = 2 + static_cast<int>(rng.next_below(4));
        std::vector<int> truth(n);
        std::vector<double> probs(n * static_cast<size_t>(C));
        Mask retained(n);
        for (size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(C)));
            retained[i] = rng.next_double() < 0.8 ? 1 : 0;
            double z = 0.0;
            for (int c = 0; c < C; ++c) {
                // quantized scores force ties
                const double v = std::floor(rng.next_double() * 8.0) / 8.0 + 0.01;
                probs[i * static_cast<size_t>(C) + static_cast<size_t>(c)] = v;
                z += v;
            }
            for (int c = 0; c < C; ++c)
                probs[i * static_cast<size_t>(C) + static_cast<size_t>(c)] /= z;
        }
        const auto fast = macro_auc_ovr(truth, probs, retained, C);
        const auto slow = brute_auc(truth, probs, retained, C);
        CHECK(fast.value.has_value() == slow.has_value());
        if (slow) CHECK(*fast.value == doctest::Approx(*slow).epsilon(1e-12));
    }
}

TEST_CASE("AUC complement under score negation (no ties)") {
    Rng rng(29);
    const size_t n = 50;
    std::vector<int> truth(n);
    std::vector<double> probs(n * 2);
    for (size_t i = 0; i < n; ++i) {
        truth[i] = static_cast<int>(rng.next_below(2));
        const double s = rng.next_double();
        probs[i * 2] = s;
        probs[i * 2 + 1] = 1.0 - s;
    }
    std::vector<double> neg(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) neg[i] = -probs[i];
    const double a = *macro_auc_ovr(truth, probs, all_true(n), 2).value;
    const double b = *macro_auc_ovr(truth, neg, all_true(n), 2).value;
    CHECK(a + b == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("argmax breaks ties toward the lowest class") {
    CHECK(argmax_class(std::vector<double>{0.4, 0.4, 0.2}) == 0);
    CHECK(argmax_class(std::vector<double>{0.2, 0.4, 0.4}) == 1);
}

TEST_CASE("region masks") {
    const std::vector<int> zeros{0, 0, 0};
    CHECK(region_mask(zeros, {"WT", {1, 2, 3}}) == Mask{0, 0, 0});
    const std::vector<int> mixed{0, 2, 2, 1};
    CHECK(region_mask(mixed, {"X", {2}}) == Mask{0, 1, 1, 0});

    // nested regions give monotone mask sizes
    const std::vector<int> vol{0, 1, 2, 3, 3, 1, 0, 2};
    const auto wt = region_mask(vol, {"WT", {1, 2, 3}});
    const auto tc = region_mask(vol, {"TC", {1, 3}});
    const auto et = region_mask(vol, {"ET", {3}});
    auto count = [](const Mask& m) {
        size_t n = 0;
        for (auto v : m) n += v;
        return n;
    };
    CHECK(count(wt) >= count(tc));
    CHECK(count(tc) >= count(et));
}

TEST_CASE("dice") {
    const Mask a{1, 1, 0, 0}, b{1, 0, 1, 0};
    CHECK(*dice(a, a, all_true(4)).value == 1.0);
    CHECK(*dice(a, b, all_true(4)).value == doctest::Approx(0.5)); // 2*1/(2+2)
    CHECK(*dice(Mask{0, 0}, Mask{0, 0}, all_true(2)).value == 1.0);
    CHECK(*dice(Mask{1, 0}, Mask{0, 0}, all_true(2)).value == 0.0);
    // retaining only agreeing voxels removes all error
    const Mask keep{1, 0, 0, 1};
    CHECK(*dice(a, b, keep).value == 1.0);
    // symmetry
    Rng rng(3);
    for (int iter = 0; iter < 30; ++iter) {
        Mask p(16), g(16), r(16);
        for (size_t i = 0; i < 16; ++i) {
            p[i] = rng.next_below(2);
            g[i] = rng.next_below(2);
            r[i] = rng.next_below(2);
        }
        const auto d1 = dice(p, g, r), d2 = dice(g, p, r);
        CHECK(d1.value.has_value() == d2.value.has_value());
        if (d1.value) CHECK(*d1.value == *d2.value);
    }
}

TEST_CASE("ftp/ftn") {
    const Mask pred{1, 1, 0, 0}, truth{1, 1, 0, 0};
    CHECK(ftp_ftn(pred, truth, all_true(4)) == std::pair{0.0, 0.0});
    CHECK(ftp_ftn(pred, truth, Mask{0, 0, 1, 1}) == std::pair{1.0, 0.0});

    const Mask p4{1, 1, 1, 1, 0}, t4{1, 1, 1, 1, 0};
    CHECK(ftp_ftn(p4, t4, Mask{1, 1, 0, 0, 1}).first == doctest::Approx(0.5));
    // zero denominator -> 0
    CHECK(ftp_ftn(Mask{0, 0}, Mask{1, 1}, Mask{0, 0}).first == 0.0);
}

TEST_CASE("QU-BraTS scalar boundary cases") {
    const std::vector<double> taus{100, 50, 0};
    using OptV = std::vector<std::optional<double>>;
    const OptV ones{1.0, 1.0, 1.0}, zeros{0.0, 0.0, 0.0}, halves{0.5, 0.5, 0.5};
    CHECK(*qubrats_score(taus, ones, zeros, zeros) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(*qubrats_score(taus, zeros, ones, ones) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(*qubrats_score(taus, halves, halves, halves) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(qubrats_score(taus, OptV{1.0, 1.0}, zeros, zeros),
                         doctest::Contains("GridMismatch"), ValidationError);
}

TEST_CASE("rmse and mae") {
    const std::vector<double> t{1, 2, 3}, p_same{1, 2, 3}, p_off{2, 3, 4};
    CHECK(*rmse(t, p_same, all_true(3)).value == 0.0);
    CHECK(*mae(t, p_same, all_true(3)).value == 0.0);
    CHECK(*rmse(t, p_off, all_true(3)).value == doctest::Approx(1.0));
    CHECK(*mae(t, p_off, all_true(3)).value == doctest::Approx(1.0));

    const std::vector<double> t2{0, 0}, p2{1, -3};
    CHECK(*rmse(t2, p2, all_true(2)).value == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    CHECK(*mae(t2, p2, all_true(2)).value == doctest::Approx(2.0));

    // RMSE >= MAE on random inputs (Jensen)
    Rng rng(41);
    for (int iter = 0; iter < 50; ++iter) {
        const size_t n = 2 + rng.next_below(30);
        std::vector<double> truth(n), pred(n);
        for (size_t i = 0; i < n; ++i) {
            truth[i] = rng.next_gaussian();
            pred[i] = rng.next_gaussian();
        }
        CHECK(*rmse(truth, pred, all_true(n)).value >=
              *mae(truth, pred, all_true(n)).value - 1e-12);
    }
}
