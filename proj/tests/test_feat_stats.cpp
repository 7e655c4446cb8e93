#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "hydra/feat_stats.hpp"
#include "hydra/gbdt.hpp"

using namespace hydra;

TEST_CASE("rolling stats on constant and linear series") {
    WindowSpec spec;
    spec.window = 4;
    const auto flat = rolling_stats(Eigen::Vector4d(2, 2, 2, 2), spec);
    CHECK(flat.mean(3) == 2.0);
    CHECK(flat.trend(3) == 0.0);
    CHECK(flat.rolling_std(3) == 0.0);
    CHECK(flat.full_window(3));
    CHECK_FALSE(flat.full_window(2));

    const auto ramp = rolling_stats(Eigen::Vector4d(1, 2, 3, 4), spec);
    CHECK(ramp.trend(3) == 0.75);
}

TEST_CASE("rolling stats equal a naive windowed rescan") {
    Rng rng(21);
    WindowSpec spec;
    spec.window = 5;
    Eigen::VectorXd x = test::random_vector(rng, 10);
    x(4) = 0.0;
    const auto r = rolling_stats(x, spec);
    for (Eigen::Index t = 0; t < 10; ++t) {
        std::vector<double> w;
        for (Eigen::Index s = std::max<Eigen::Index>(0, t - 4); s <= t; ++s) w.push_back(x(s));
        double sum = 0, mx = -1e300, nz = 0;
        for (double v : w) {
            sum += v;
            mx = std::max(mx, v);
            nz += v != 0.0;
        }
        const double mean = sum / static_cast<double>(w.size());
        double ss = 0;
        for (double v : w) ss += (v - mean) * (v - mean);
        const double var = ss / static_cast<double>(w.size());
        CHECK(r.mean(t) == doctest::Approx(mean).epsilon(1e-13));
        CHECK(r.variance(t) == doctest::Approx(var).epsilon(1e-12));
        CHECK(r.max(t) == mx);
        CHECK(r.trend(t) == doctest::Approx((w.back() - w.front()) / static_cast<double>(w.size())).epsilon(1e-13));
        CHECK(r.rolling_std(t) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
        CHECK(r.coeff_var(t) == doctest::Approx(std::sqrt(var) / std::abs(mean)).epsilon(1e-10));
        CHECK(r.first_diff(t) == (t == 0 ? 0.0 : x(t) - x(t - 1)));
        CHECK(r.event_count(t) == nz);
        CHECK(r.full_window(t) == (w.size() == 5));
    }
}

TEST_CASE("lags and trailing quantiles") {
    WindowSpec spec;
    spec.window = 4;
    spec.lags = {1};
    spec.quantiles = {0.25, 0.5};
    const auto lq = lag_and_quantile(Eigen::Vector3d(5, 6, 7), spec);
    CHECK(std::isnan(lq.lags(0, 0)));
    CHECK(lq.lag_missing(0, 0));
    CHECK(lq.lags(1, 0) == 5.0);
    CHECK(lq.lags(2, 0) == 6.0);

    const auto window = lag_and_quantile(Eigen::Vector4d(4, 1, 3, 2), spec);
    CHECK(window.quantiles(3, 0) == doctest::Approx(1.75));
    CHECK(window.quantiles(3, 1) == doctest::Approx(2.5));
}

TEST_CASE("target encoder closed form") {
    const std::vector<std::int32_t> codes{1, 1, 1};
    const std::vector<int> labels{1, 1, 0};
    const TargetEncoder enc(codes, labels, {0.5, 1.0, 0.0, 0});
    CHECK(enc.value(1) == doctest::Approx(0.625));

    const TargetEncoder empty(codes, labels, {0.1, 1.0, 0.0, 0});
    CHECK(empty.value(7) == doctest::Approx(0.1));

    const TargetEncoder noisy(codes, labels, {0.5, 1.0, 0.05, 42});
    const TargetEncoder again(codes, labels, {0.5, 1.0, 0.05, 42});
    CHECK(noisy.value(1) == doctest::Approx(0.625 + noisy.noise_for(1)).epsilon(1e-15));
    CHECK(noisy.noise_for(1) != 0.0);
    CHECK(noisy.value(1) == again.value(1));

    // lambda 0, no noise: the plain category mean
    const TargetEncoder mean_only(codes, labels, {0.0, 0.0, 0.0, 0});
    CHECK(mean_only.value(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("out-of-fold and ordered encodings never see their own label") {
    Rng rng(23);
    const std::size_t n = 120;
    std::vector<std::int32_t> codes(n);
    std::vector<int> labels(n), folds(n);
    for (std::size_t i = 0; i < n; ++i) {
        codes[i] = static_cast<std::int32_t>(1 + rng.index(8));
        labels[i] = rng.bernoulli(0.4) ? 1 : 0;
        folds[i] = static_cast<int>(i % 4);
    }
    const TargetEncoderParams params{0.4, 1.0, 0.02, 5};
    const Eigen::VectorXd before = out_of_fold_target_encoding(codes, labels, folds, params);
    const Eigen::VectorXd ordered_before = ordered_target_statistics(codes, labels, 99, 0.4);
    CHECK(before == out_of_fold_target_encoding(codes, labels, folds, params));
    for (std::size_t i = 0; i < n; i += 7) {
        auto flipped = labels;
        flipped[i] = 1 - flipped[i];
        CHECK(out_of_fold_target_encoding(codes, flipped, folds, params)(static_cast<Eigen::Index>(i)) ==
              before(static_cast<Eigen::Index>(i)));
        CHECK(ordered_target_statistics(codes, flipped, 99, 0.4)(static_cast<Eigen::Index>(i)) ==
              ordered_before(static_cast<Eigen::Index>(i)));
    }
}

TEST_CASE("frequency ratios") {
    const FrequencyEncoder single(std::vector<std::int32_t>{3, 3, 3});
    CHECK(single.frequency(3) == 1.0);
    CHECK(single.dominance(3) == 1.0);

    const FrequencyEncoder two(std::vector<std::int32_t>{1, 1, 1, 2});
    CHECK(two.dominance(2) == doctest::Approx(1.0 / 3.0));
    CHECK(two.frequency(1) == doctest::Approx(0.75));
    CHECK(two.frequency(9) == 0.0);
    CHECK(two.dominance(kUnknownCode) == 0.0);
}

TEST_CASE("cardinality routing") {
    auto frame_with = [](int categories) {
        std::vector<std::string> tokens;
        std::vector<int> labels;
        for (int i = 0; i < categories; ++i) {
            tokens.push_back("c" + std::to_string(i));
            labels.push_back(i % 2);
        }
        // c0 is the most frequent level, so its ordinal rank is known
        for (int i = 0; i < 5; ++i) {
            tokens.push_back("c0");
            labels.push_back(i % 2);
        }
        return test::categorical_frame(tokens, labels);
    };
    const auto low = fit_categorical_encoding(test::categorical_frame({"a", "b", "a"}, {0, 1, 1}), "cat");
    CHECK(low.route == CategoricalRoute::OneHot);
    CHECK(low.output_names().size() == 2);

    const FeatureFrame mid_frame = frame_with(50);
    const auto mid = fit_categorical_encoding(mid_frame, "cat");
    CHECK(mid.route == CategoricalRoute::Ordinal);
    CHECK(mid.output_names().size() == 1);
    const Eigen::MatrixXd ranks = mid.transform(column_codes(mid_frame, "cat"));
    // c0 is drawn most often: rank 0
    CHECK(ranks(0, 0) == 0.0);

    const auto high = fit_categorical_encoding(frame_with(500), "cat");
    CHECK(high.route == CategoricalRoute::Target);
}
