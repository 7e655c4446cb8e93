#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "hydra/ensemble_gate.hpp"
#include "hydra/errors.hpp"

using namespace hydra;

TEST_CASE("gate weights under symmetric inputs") {
    const Eigen::Vector3d w = gate_weights(Eigen::Vector3d::Ones(), Eigen::Vector3d::Constant(0.4));
    for (int m = 0; m < 3; ++m) CHECK(w(m) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("gate weights with zero priors and a missing loss") {
    std::vector<std::string> events;
    const Eigen::Vector3d w = gate_weights(Eigen::Vector3d::Zero(),
                                           Eigen::Vector3d(0.0, std::log(2.0), std::numeric_limits<double>::infinity()),
                                           &events);
    CHECK(w(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(w(2) == 0.0);

    const Eigen::Vector3d nan_loss = gate_weights(Eigen::Vector3d::Ones(), Eigen::Vector3d(0.5, std::nan(""), 0.5), &events);
    CHECK(nan_loss.sum() == doctest::Approx(1.0));
    CHECK_FALSE(events.empty());
}

TEST_CASE("gate weights match hand arithmetic") {
    const double a = 1 + std::exp(-0.5), b = 1 + std::exp(-0.6), c = 1 + std::exp(-0.7);
    const Eigen::Vector3d w = gate_weights(Eigen::Vector3d::Ones(), Eigen::Vector3d(0.5, 0.6, 0.7));
    CHECK(w(0) == doctest::Approx(a / (a + b + c)).epsilon(1e-15));
    CHECK(w(1) == doctest::Approx(b / (a + b + c)).epsilon(1e-15));
    CHECK(w(2) == doctest::Approx(c / (a + b + c)).epsilon(1e-15));
}

TEST_CASE("gate normalization and monotonicity over random grids") {
    Rng rng(81);
    for (int t = 0; t < 300; ++t) {
        Eigen::Vector3d beta, loss;
        for (int m = 0; m < 3; ++m) {
            beta(m) = rng.uniform(0.0, 2.0);
            loss(m) = rng.uniform(0.0, 4.0);
        }
        const Eigen::Vector3d w = gate_weights(beta, loss);
        CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
        Eigen::Vector3d better = loss;
        better(t % 3) *= 0.5;
        if (better(t % 3) < loss(t % 3)) CHECK(gate_weights(beta, better)(t % 3) > w(t % 3));
    }
}

TEST_CASE("update_weights records losses and uniform mode ignores them") {
    GateState s = GateState::initial(3, 1.0);
    s = update_weights(s, Eigen::Vector3d(0.1, 0.9, 0.5));
    CHECK(s.weights(0) > s.weights(2));
    CHECK(s.weights(2) > s.weights(1));
    CHECK(s.epoch == 1);

    GateState u = GateState::initial(3, 1.0, 2.0, 0.1, true);
    u = update_weights(u, Eigen::Vector3d(0.1, 0.9, 0.5));
    for (int m = 0; m < 3; ++m) CHECK(u.weights(m) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("blend") {
    Eigen::MatrixXd same(4, 3);
    for (int m = 0; m < 3; ++m) same.col(m) = Eigen::Vector4d(0.1, 0.5, 0.7, 0.9);
    CHECK(blend(same, Eigen::Vector3d(0.2, 0.3, 0.5)).isApprox(same.col(0), 1e-15));

    Rng rng(82);
    Eigen::MatrixXd p(5, 3);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (int m = 0; m < 3; ++m) p(i, m) = rng.uniform();
    }
    CHECK(blend(p, Eigen::Vector3d(1, 0, 0)) == p.col(0));
    const Eigen::Vector3d w(0.2, 0.5, 0.3);
    const Eigen::VectorXd b = blend(p, w);
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(b(i) == doctest::Approx(0.2 * p(i, 0) + 0.5 * p(i, 1) + 0.3 * p(i, 2)).epsilon(1e-15));
        CHECK(b(i) >= p.row(i).minCoeff());
        CHECK(b(i) <= p.row(i).maxCoeff());
    }
    CHECK_THROWS_AS(blend(p, Eigen::Vector2d(0.5, 0.5)), ShapeError);
}

TEST_CASE("consistency penalty and total objective") {
    const Eigen::Vector3d p(0.2, 0.6, 0.9);
    CHECK(consistency_penalty(p, p, 1.0) == doctest::Approx(0.0).scale(1.0));

    const Eigen::VectorXd one_star = Eigen::VectorXd::Constant(1, 0.8), one_target = Eigen::VectorXd::Constant(1, 0.6);
    CHECK(consistency_penalty(one_star, one_target, 1.0) ==
          doctest::Approx(0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4)).epsilon(1e-14));

    const Eigen::VectorXd hot = temperature_target(p, 1e9);
    CHECK((hot.array() - 0.5).abs().maxCoeff() < 1e-8);
    double half = 0;
    for (int i = 0; i < 3; ++i) half += p(i) * std::log(p(i) / 0.5) + (1 - p(i)) * std::log((1 - p(i)) / 0.5);
    CHECK(consistency_penalty(p, hot, 0.7) == doctest::Approx(0.7 * half / 3).epsilon(1e-7));

    // tau = 1 leaves the best expert's probabilities as they are
    CHECK(temperature_target(p, 1.0).isApprox(p, 1e-14));

    const Eigen::Vector3d losses(0.4, 0.5, 0.6);
    CHECK(total_objective(losses, p, Eigen::Vector3d(0.3, 0.3, 0.3), 0.0) == doctest::Approx(1.5));
    CHECK(total_objective(Eigen::Vector3d::Constant(0.45), p, p, 0.3) == doctest::Approx(3 * 0.45));
    CHECK(total_objective(losses, one_star.replicate(3, 1), one_target.replicate(3, 1), 2.0) ==
          doctest::Approx(1.5 + 2.0 * (0.8 * std::log(0.8 / 0.6) + 0.2 * std::log(0.2 / 0.4))).epsilon(1e-14));
}

TEST_CASE("best expert ignores non-finite losses") {
    CHECK(best_expert(Eigen::Vector3d(0.5, 0.3, 0.3)) == 1);
    CHECK(best_expert(Eigen::Vector3d(std::nan(""), 0.9, 0.8)) == 2);
}

TEST_CASE("gate trajectory CSV header") {
    GateTrajectoryRow row{1, 4, {0.5, 0.6, 0.7}, {0.4, 0.3, 0.3}};
    const std::string csv = gate_trajectory_csv({row});
    CHECK(csv.rfind("epoch,week,loss_", 0) == 0);
    CHECK(csv.find("\n1,4,") != std::string::npos);
}
