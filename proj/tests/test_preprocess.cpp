#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "hydra/errors.hpp"
#include "hydra/preprocess.hpp"

using namespace hydra;

namespace {

// Histogram on reference type-7 quantile edges, right-closed bins, 0.5
// pseudo-count per bin.
double histogram_psi(const std::vector<double>& ref, const std::vector<double>& cmp, int bins) {
    std::vector<double> sorted = ref;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int b = 1; b < bins; ++b) {
        const double pos = (static_cast<double>(sorted.size()) - 1) * b / bins;
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        edges.push_back(sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
    }
    auto hist = [&](const std::vector<double>& v) {
        std::vector<double> h(static_cast<std::size_t>(bins), 0.5);
        for (double x : v) {
            int b = 0;
            while (b < bins - 1 && x > edges[static_cast<std::size_t>(b)]) ++b;
            h[static_cast<std::size_t>(b)] += 1;
        }
        const double total = std::accumulate(h.begin(), h.end(), 0.0);
        for (double& x : h) x /= total;
        return h;
    };
    const auto p = hist(ref), q = hist(cmp);
    double s = 0;
    for (std::size_t b = 0; b < p.size(); ++b) s += (p[b] - q[b]) * std::log(p[b] / q[b]);
    return s;
}

FeatureFrame two_week_frame(const std::vector<double>& early, const std::vector<double>& late) {
    const auto n = static_cast<Eigen::Index>(early.size() + late.size());
    Eigen::MatrixXd values(n, 1);
    std::vector<int> weeks, labels;
    for (std::size_t i = 0; i < early.size(); ++i) {
        values(static_cast<Eigen::Index>(i), 0) = early[i];
        weeks.push_back(1);
        labels.push_back(static_cast<int>(i % 2));
    }
    for (std::size_t i = 0; i < late.size(); ++i) {
        values(static_cast<Eigen::Index>(early.size() + i), 0) = late[i];
        weeks.push_back(2);
        labels.push_back(static_cast<int>(i % 2));
    }
    return test::numeric_frame({"f"}, values, weeks, labels);
}

}  // namespace

TEST_CASE("folds: symmetric groups split with zero bias") {
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(8, 1);
    const FeatureFrame frame =
        test::numeric_frame({"a"}, values, {1, 1, 1, 1, 1, 1, 1, 1}, {0, 1, 0, 1, 0, 1, 0, 1}, {0, 0, 1, 1, 2, 2, 3, 3});
    const FoldPlan plan = build_folds(frame, 2, 0.02, 1);
    CHECK(plan.fold_bias[0] == 0.0);
    CHECK(plan.fold_bias[1] == 0.0);
}

TEST_CASE("folds: one group spanning every row is infeasible") {
    const FeatureFrame frame = test::numeric_frame({"a"}, Eigen::MatrixXd::Zero(6, 1), {1, 1, 1, 2, 2, 2},
                                                   {0, 1, 0, 1, 0, 1}, {7, 7, 7, 7, 7, 7});
    try {
        build_folds(frame, 2, 0.02, 1);
        FAIL("expected FoldError");
    } catch (const FoldError& e) {
        CHECK(std::string(e.what()).find("fold " + std::to_string(e.fold())) != std::string::npos);
    }
}

TEST_CASE("folds: mixed groups meet the bias bound and stay group-atomic") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        std::vector<int> weeks, labels, groups;
        for (int g = 0; g < 20; ++g) {
            const int size = 5 + static_cast<int>(rng.index(10));
            const double rate = rng.uniform(0.1, 0.6);
            for (int r = 0; r < size; ++r) {
                groups.push_back(g);
                weeks.push_back(1 + static_cast<int>(rng.index(4)));
                labels.push_back(rng.bernoulli(rate) ? 1 : 0);
            }
        }
        const auto n = static_cast<Eigen::Index>(labels.size());
        const FeatureFrame frame = test::numeric_frame({"a"}, Eigen::MatrixXd::Zero(n, 1), weeks, labels, groups);
        const FoldPlan plan = build_folds(frame, 5, 0.05, seed);
        const double mu = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);
        std::map<int, std::set<int>> folds_of_group;
        std::vector<double> pos(5, 0), cnt(5, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int f = plan.assignment[static_cast<std::size_t>(i)];
            folds_of_group[groups[static_cast<std::size_t>(i)]].insert(f);
            pos[static_cast<std::size_t>(f)] += labels[static_cast<std::size_t>(i)];
            cnt[static_cast<std::size_t>(f)] += 1;
        }
        for (const auto& [g, folds] : folds_of_group) CHECK(folds.size() == 1);
        std::size_t covered = 0;
        for (int f = 0; f < 5; ++f) {
            const auto fs = static_cast<std::size_t>(f);
            CHECK(std::abs(pos[fs] / cnt[fs] - mu) < 0.05);
            CHECK(std::abs(pos[fs] / cnt[fs] - mu) == doctest::Approx(plan.fold_bias[fs]).epsilon(1e-12));
            const auto& rows = plan.fold_rows[fs];
            covered += rows.size();
            for (std::size_t r = 1; r < rows.size(); ++r) {
                const auto a = rows[r - 1], b = rows[r];
                CHECK((frame.week(a) < frame.week(b) || (frame.week(a) == frame.week(b) && a < b)));
            }
        }
        CHECK(covered == static_cast<std::size_t>(n));
    }
}

TEST_CASE("imputer: median, mode and indicators") {
    Eigen::MatrixXd values(3, 1);
    values << 1, std::nan(""), 3;
    const FeatureFrame frame = test::numeric_frame({"x"}, values, {1, 1, 1}, {0, 1, 0});
    const ImputationModel model = fit_imputer(frame);
    CHECK(model.numeric_fill(0) == 2.0);
    const FeatureFrame out = apply_imputer(model, frame);
    CHECK(out.numeric(1, out.numeric_index("x")) == 2.0);
    const auto ind = out.numeric_index(missing_indicator_name("x"));
    CHECK(out.numeric(0, ind) == 0.0);
    CHECK(out.numeric(1, ind) == 1.0);
    CHECK(out.numeric(2, ind) == 0.0);
    CHECK(out.missing.count() == 0);

    const FeatureFrame cat = test::categorical_frame({"a", "a", "b", ""}, {0, 1, 0, 1});
    const ImputationModel cm = fit_imputer(cat);
    const FeatureFrame cat_out = apply_imputer(cm, cat);
    CHECK(cat_out.categorical(3, 0) == cat.vocabularies[0].code_of("a"));

    const FeatureFrame clean = test::numeric_frame({"x"}, Eigen::MatrixXd::Ones(3, 1), {1, 1, 1}, {0, 1, 0});
    const FeatureFrame same = apply_imputer(fit_imputer(clean), clean);
    CHECK(same.numeric == clean.numeric);
    CHECK(fit_imputer(clean).indicator_columns.empty());

    Eigen::MatrixXd empty(2, 1);
    empty << std::nan(""), std::nan("");
    CHECK_THROWS_WITH_AS(fit_imputer(test::numeric_frame({"income"}, empty, {1, 1}, {0, 1})),
                         doctest::Contains("income"), DataError);
}

TEST_CASE("drift normalizer") {
    Eigen::MatrixXd two(2, 1);
    two << 2, 4;
    const Eigen::VectorXi weeks = Eigen::VectorXi::Ones(2);
    const auto norm = fit_drift_normalizer(two, weeks, {"x"}, 1);
    const Eigen::MatrixXd out = apply_drift_normalizer(norm, two, weeks);
    CHECK(out(0, 0) == doctest::Approx(-1.0));
    CHECK(out(1, 0) == doctest::Approx(1.0));

    const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 1, 5.0);
    const Eigen::VectorXi w4 = Eigen::VectorXi::Ones(4);
    CHECK(apply_drift_normalizer(fit_drift_normalizer(constant, w4, {"x"}, 1), constant, w4).isZero());

    Rng rng(9);
    Eigen::MatrixXd values(200, 2);
    Eigen::VectorXi wk(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        wk(i) = i < 100 ? 1 : 2;
        values(i, 0) = rng.normal(wk(i) == 1 ? 0.0 : 5.0, 1.0);
        values(i, 1) = rng.normal(3.0, wk(i) == 1 ? 1.0 : 4.0);
    }
    const auto fitted = fit_drift_normalizer(values, wk, {"a", "b"}, 1);
    const Eigen::MatrixXd z = apply_drift_normalizer(fitted, values, wk);
    for (int w = 1; w <= 2; ++w) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            double sum = 0, sq = 0;
            for (Eigen::Index i = 0; i < 200; ++i) {
                if (wk(i) != w) continue;
                sum += z(i, j);
                sq += z(i, j) * z(i, j);
            }
            CHECK(std::abs(sum / 100) < 1e-9);
            CHECK(std::abs(std::sqrt(sq / 100) - 1.0) < 1e-9);
        }
    }

    // A week with no fitted statistics falls back to a neighbouring period.
    Eigen::VectorXi later(200);
    later.setConstant(3);
    DriftReport report;
    const Eigen::MatrixXd shifted = apply_drift_normalizer(fitted, values, later, &report);
    CHECK_FALSE(report.fallbacks.empty());
    CHECK(shifted.allFinite());
}

TEST_CASE("psi basics") {
    const std::vector<double> v{0.1, 0.5, 0.3, 0.9, 0.7, 0.2, 0.8, 0.4, 0.6, 1.0};
    CHECK(psi(v, v, 10) == 0.0);

    Rng rng(10);
    std::vector<double> ref(500);
    for (auto& x : ref) x = rng.normal();
    std::vector<double> shuffled = ref;
    rng.shuffle(shuffled);
    CHECK(psi(ref, shuffled, 10) == 0.0);

    std::vector<double> a(1000), b(1000);
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform(0.5, 1.5);
    const double value = psi(a, b, 10);
    CHECK(value == doctest::Approx(histogram_psi(a, b, 10)).epsilon(1e-12));
    CHECK(value > 0.2);
    CHECK(psi(b, a, 10) >= 0.0);

    CHECK_THROWS_AS(psi(a, b, 1), ConfigError);
}

TEST_CASE("screen_features decisions follow the oracle") {
    Rng rng(11);
    std::vector<double> early(1000), stay(1000), far(1000);
    for (auto& x : early) x = rng.normal();
    for (auto& x : stay) x = rng.normal();
    for (auto& x : far) x = rng.normal() + 3.0;

    const PsiReport keep = screen_features(two_week_frame(early, stay), 0.2, 10);
    CHECK(keep.entries[0].action == PsiAction::Keep);

    const PsiReport drop = screen_features(two_week_frame(early, far), 0.2, 10);
    CHECK(histogram_psi(early, far, 10) > 0.2);
    CHECK(drop.entries[0].action == PsiAction::Drop);

    // Move a growing share of the middle fine bin (40th-60th percentile) just
    // below its lower edge. The 5-bin PSI sees mass change bins while every
    // moved value stays inside the middle third, so the 3-bin PSI does not.
    int rebins = 0;
    const double lo = quantile(early, 0.40), hi = quantile(early, 0.60);
    const double dest_lo = quantile(early, 0.35), dest_hi = quantile(early, 0.39);
    for (double share = 0.05; share <= 1.0; share += 0.05) {
        std::vector<double> late = stay;
        Rng pick(12);
        for (auto& x : late) {
            if (x > lo && x <= hi && pick.uniform() < share) x = pick.uniform(dest_lo, dest_hi);
        }
        const double fine = histogram_psi(early, late, 5), coarse = histogram_psi(early, late, 3);
        const PsiReport r = screen_features(two_week_frame(early, late), 0.2, 5);
        const PsiAction expected = fine <= 0.2 ? PsiAction::Keep : (coarse <= 0.2 ? PsiAction::Rebin : PsiAction::Drop);
        CHECK(r.entries[0].action == expected);
        CHECK(r.entries[0].psi == doctest::Approx(fine).epsilon(1e-12));
        rebins += r.entries[0].action == PsiAction::Rebin;
    }
    CHECK(rebins > 0);
}

TEST_CASE("robust scaler") {
    Eigen::MatrixXd values(5, 1);
    values << 1, 2, 3, 4, 5;
    const RobustScaler scaler = fit_robust_scaler(values, {"x"});
    CHECK(scaler.median(0) == 3.0);
    CHECK(scaler.iqr(0) == 2.0);
    const Eigen::MatrixXd out = scaler.transform(values);
    CHECK(out(2, 0) == 0.0);
    CHECK(out(1, 0) == -0.5);
    CHECK(out(3, 0) == 0.5);

    const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 1, 7.0);
    CHECK(fit_robust_scaler(constant, {"c"}).transform(constant).isZero());

    Rng rng(12);
    Eigen::MatrixXd heavy(101, 1);
    for (Eigen::Index i = 0; i < 101; ++i) heavy(i, 0) = rng.normal();
    heavy(0, 0) = 100.0 * heavy.col(0).cwiseAbs().maxCoeff();
    const RobustScaler rs = fit_robust_scaler(heavy, {"h"});
    const Eigen::MatrixXd scaled = rs.transform(heavy);
    std::vector<double> sorted(scaled.data(), scaled.data() + 101);
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[50] == 0.0);
    const double mean = heavy.mean();
    const double sd = std::sqrt((heavy.array() - mean).square().mean());
    // z-scoring squeezes the bulk because the outlier inflates sigma; the
    // robust scale keeps the interquartile spread at exactly one.
    CHECK(sorted[75] - sorted[25] == doctest::Approx(1.0));
    CHECK((sorted[75] - sorted[25]) * rs.iqr(0) / sd < 0.2);
    // Applying to held-out data leaves the fitted model unchanged.
    const RobustScaler copy = rs;
    (void)rs.transform(Eigen::MatrixXd::Random(10, 1));
    CHECK(copy.median == rs.median);
}
