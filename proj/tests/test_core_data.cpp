#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hydra/core_data.hpp"
#include "hydra/errors.hpp"

using namespace hydra;

namespace {

// Concordant minus discordant over all positive/negative pairs, ties count 0.
double pair_count_gini(const Eigen::VectorXi& y, const Eigen::VectorXd& s) {
    double concordant = 0, discordant = 0, pairs = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        for (Eigen::Index j = 0; j < y.size(); ++j) {
            if (y(i) != 1 || y(j) != 0) continue;
            pairs += 1;
            concordant += s(i) > s(j);
            discordant += s(i) < s(j);
        }
    }
    return (concordant - discordant) / pairs;
}

}  // namespace

TEST_CASE("gini of perfect and inverted rankings") {
    CHECK(gini(Eigen::Vector2i(0, 1), Eigen::Vector2d(0.1, 0.9)) == doctest::Approx(1.0));
    CHECK(gini(Eigen::Vector2i(0, 1), Eigen::Vector2d(0.9, 0.1)) == doctest::Approx(-1.0));
}

TEST_CASE("gini matches exhaustive pair counting") {
    Eigen::Vector4i y(0, 0, 1, 1);
    Eigen::Vector4d s(0.1, 0.4, 0.35, 0.8);
    CHECK(gini(y, s) == doctest::Approx(pair_count_gini(y, s)).epsilon(1e-14));
    CHECK(gini(y, s) == doctest::Approx(0.5));

    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index n = 30;
        Eigen::VectorXi labels(n);
        Eigen::VectorXd scores(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            labels(i) = static_cast<int>(i % 3 == 0);
            scores(i) = static_cast<double>(rng.index(6));  // heavy ties
        }
        CHECK(gini(labels, scores) == doctest::Approx(pair_count_gini(labels, scores)).epsilon(1e-12));
    }
}

TEST_CASE("gini is invariant under strictly monotone transforms") {
    Rng rng(4);
    Eigen::VectorXi y(50);
    Eigen::VectorXd s(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
        y(i) = rng.bernoulli(0.4) ? 1 : 0;
        s(i) = rng.uniform(0.01, 3.0);
    }
    y(0) = 0;
    y(1) = 1;
    const Eigen::VectorXd transformed = s.array().square() + 1.0;
    CHECK(gini(y, s) == doctest::Approx(gini(y, transformed)).epsilon(1e-14));
}

TEST_CASE("gini on a single class is undefined") {
    CHECK_THROWS_AS(gini(Eigen::Vector3i(1, 1, 1), Eigen::Vector3d(0.1, 0.2, 0.3)), MetricError);
}

TEST_CASE("gini_stable of constant and declining sequences") {
    const std::vector<std::pair<int, double>> constant{{1, 0.5}, {2, 0.5}, {3, 0.5}};
    CHECK(gini_stable(constant) == doctest::Approx(0.5));

    // 0.6, 0.5, 0.4: mean 0.5, population std sqrt(2/3)/10, slope -0.1 from
    // the two end points, which a three-point line through evenly spaced x
    // reproduces exactly.
    const std::vector<std::pair<int, double>> falling{{1, 0.6}, {2, 0.5}, {3, 0.4}};
    const double slope = (0.4 - 0.6) / (3 - 1);
    const double expected = 0.5 - 0.5 * std::sqrt(2.0 / 3.0) / 10.0 + 88.0 * slope;
    CHECK(gini_stable(falling) == doctest::Approx(expected).epsilon(1e-12));

    const std::vector<std::pair<int, double>> rising{{1, 0.4}, {2, 0.5}, {3, 0.6}};
    CHECK(gini_stable(rising) == doctest::Approx(0.5 - 0.5 * std::sqrt(2.0 / 3.0) / 10.0).epsilon(1e-12));

    CHECK_THROWS_AS(gini_stable(std::vector<std::pair<int, double>>{{1, 0.5}}), MetricError);
}

TEST_CASE("brier and log loss") {
    CHECK(brier(Eigen::VectorXi::Ones(1), Eigen::VectorXd::Ones(1)) == 0.0);
    CHECK(log_loss(Eigen::VectorXi::Ones(1), Eigen::VectorXd::Ones(1)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(brier(Eigen::Vector2i(0, 1), Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.25));
    CHECK(log_loss(Eigen::Vector2i(0, 1), Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(std::log(2.0)));

    Rng rng(5);
    Eigen::VectorXi y(20);
    Eigen::VectorXd p(20);
    double b = 0, l = 0;
    for (Eigen::Index i = 0; i < 20; ++i) {
        y(i) = rng.bernoulli(0.5) ? 1 : 0;
        p(i) = rng.uniform();
        b += (p(i) - y(i)) * (p(i) - y(i));
        l -= y(i) ? std::log(p(i)) : std::log(1 - p(i));
    }
    CHECK(brier(y, p) == doctest::Approx(b / 20).epsilon(1e-14));
    CHECK(log_loss(y, p) == doctest::Approx(l / 20).epsilon(1e-14));
    CHECK(brier(y, p) >= 0.0);
    CHECK(brier(y, p) <= 1.0);
    // a confidently wrong prediction stays finite
    CHECK(std::isfinite(log_loss(Eigen::VectorXi::Zero(1), Eigen::VectorXd::Ones(1))));
}

TEST_CASE("validate_frame reports violations as data") {
    auto frame = test::numeric_frame({"a"}, Eigen::MatrixXd::Zero(0, 1), {}, {});
    CHECK(validate_frame(frame).empty());

    Schema dup = test::numeric_schema({"a", "a"});
    auto bad = FeatureFrame::allocate(dup, 2);
    const auto errors = validate_frame(bad);
    REQUIRE_FALSE(errors.empty());
    CHECK(errors.front().find("duplicate column") != std::string::npos);

    auto cat = test::categorical_frame({"a", "b"}, {0, 1});
    cat.categorical(1, 0) = 99;
    const auto first = validate_frame(cat);
    CHECK_FALSE(first.empty());
    CHECK(validate_frame(cat) == first);
}

TEST_CASE("vocabulary reserves code 0 for unseen values") {
    Vocabulary v;
    CHECK(v.code_of("never") == kUnknownCode);
    const auto a = v.add("a");
    CHECK(a != kUnknownCode);
    CHECK(v.add("a") == a);
    CHECK(v.token(a) == "a");
}

TEST_CASE("quantile uses linear interpolation") {
    CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
}
