#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "hydra/commands.hpp"
#include "hydra/errors.hpp"
#include "hydra/run_config.hpp"
#include "hydra/trainer.hpp"

using namespace hydra;

namespace {

RunConfig small_config() {
    return parse_run_config(R"(
run.seed = 7
synthetic.weeks = 4
synthetic.rows_per_week = 150
synthetic.series_length = 24
synthetic.employers = 30
synthetic.drift = coefficient_flip@3:1
trainer.burn_in_weeks = 2
denselight.learning_rate = 0.05
denselight.momentum = 0.9
denselight.width = 16
denselight.max_epochs = 10
graph.epochs = 10
autocross.generations = 1
autocross.beam_width = 4
)");
}

TrainerConfig trainer_of(const RunConfig& c) {
    TrainerConfig t = c.trainer;
    t.seed = c.seed;
    return t;
}

std::vector<Eigen::Index> iota_rows(Eigen::Index lo, Eigen::Index n) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), lo);
    return rows;
}

}  // namespace

TEST_CASE("reservoir: week shares are uniform over past rows") {
    // 5 weeks x 20 rows, capacity 10; each week should hold 2 slots on average.
    Eigen::VectorXi weeks(100);
    for (Eigen::Index i = 0; i < 100; ++i) weeks(i) = static_cast<int>(i / 20) + 1;
    std::vector<double> count(5, 0.0);
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        ReplayBuffer buffer(10, seed);
        for (int w = 0; w < 5; ++w) {
            const auto rows = iota_rows(20 * w, 20);
            buffer.offer(rows, weeks);
        }
        CHECK(buffer.size() == 10);
        CHECK(buffer.seen() == 100);
        for (const auto& e : buffer.entries()) {
            CHECK(weeks(e.row) == e.week);
            count[static_cast<std::size_t>(e.week - 1)] += 1.0;
        }
    }
    double chi2 = 0;
    for (double c : count) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
    CHECK(chi2 < 13.277);  // chi-square, 4 degrees of freedom, upper 1%
}

TEST_CASE("reservoir: capacity bound and sampling without replacement") {
    Eigen::VectorXi weeks = Eigen::VectorXi::Ones(30);
    ReplayBuffer buffer(8, 3);
    const auto rows = iota_rows(0, 30);
    buffer.offer(rows, weeks);
    CHECK(buffer.size() == 8);
    const auto s = buffer.sample(5, 1);
    std::set<Eigen::Index> distinct;
    for (const auto& e : s) distinct.insert(e.row);
    CHECK(distinct.size() == 5);
    CHECK(buffer.sample(50, 1).size() == 8);
    CHECK(buffer.sample(5, 1).front().row == s.front().row);
}

TEST_CASE("make_epoch_batch ratio examples") {
    Eigen::VectorXi weeks(400);
    for (Eigen::Index i = 0; i < 400; ++i) weeks(i) = i < 300 ? 1 : 2;
    const auto fresh = iota_rows(300, 100);

    const ReplayBuffer empty(200, 1);
    const EpochBatch cold = make_epoch_batch(fresh, weeks, empty, 1.0, 5);
    CHECK(cold.rows.size() == 100);
    CHECK(cold.replay_rows == 0);

    ReplayBuffer big(200, 1);
    const auto old_rows = iota_rows(0, 300);
    big.offer(old_rows, weeks);
    const EpochBatch full = make_epoch_batch(fresh, weeks, big, 1.0, 5);
    CHECK(full.new_rows == 100);
    CHECK(full.replay_rows == 100);
    CHECK(full.rows.size() == 200);
    for (std::size_t k = 0; k < 100; ++k) CHECK(full.origin_week[k] == 2);
    for (std::size_t k = 100; k < 200; ++k) CHECK(full.origin_week[k] == 1);

    ReplayBuffer small(40, 1);
    small.offer(old_rows, weeks);
    const EpochBatch short_batch = make_epoch_batch(fresh, weeks, small, 1.0, 5);
    CHECK(short_batch.new_rows == 100);
    CHECK(short_batch.replay_rows == 40);
    CHECK(short_batch.requested_replay == 100);

    CHECK(make_epoch_batch(fresh, weeks, big, 1.0, 5).rows == full.rows);
}

TEST_CASE("plan: weekly order, disjoint stratified validation") {
    Rng rng(101);
    const Eigen::Index n = 300;
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, 1);
    std::vector<int> weeks(n), labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        weeks[static_cast<std::size_t>(i)] = 3 - static_cast<int>(i % 3);
        labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.3);
    }
    const FeatureFrame frame = test::numeric_frame({"x"}, values, weeks, labels);
    const EpochPlan plan = make_plan(frame, 0.2, 1.0, 9);
    REQUIRE(plan.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& e = plan.epochs[k];
        CHECK(e.week == static_cast<int>(k) + 1);
        std::vector<Eigen::Index> both;
        std::set_intersection(e.train.begin(), e.train.end(), e.validation.begin(), e.validation.end(), std::back_inserter(both));
        CHECK(both.empty());
        CHECK(e.train.size() + e.validation.size() == 100);
        for (auto r : e.train) CHECK(frame.week(r) == e.week);
        for (auto r : e.validation) CHECK(frame.week(r) == e.week);
        CHECK(e.validation.size() >= 18);
        CHECK(e.validation.size() <= 22);
        int pos_val = 0, pos_all = 0;
        for (auto r : e.validation) pos_val += frame.labels()(r);
        for (Eigen::Index i = 0; i < n; ++i) pos_all += frame.week(i) == e.week ? frame.labels()(i) : 0;
        CHECK(std::abs(pos_val - 0.2 * pos_all) <= 1.0);
    }
}

TEST_CASE("ablation names") {
    for (auto a : kAblations) CHECK(parse_ablation(to_string(a)) == a);
    CHECK(variant_label(Ablation::NoGraph) == "w/o Graph Features");
    CHECK(variant_label(Ablation::NoAutoCross) == "w/o AutoCross");
    CHECK(variant_label(Ablation::NoSpectro) == "w/o SpectroTemporal");
    CHECK(variant_label(Ablation::UniformGate) == "Static Ensemble Weights");
    CHECK_THROWS_AS(parse_ablation("no-trees"), ConfigError);

    TrainerConfig t;
    CHECK_FALSE(apply_ablation([&] { t.ablation = Ablation::NoGraph; return t; }()).features.graph);
    CHECK_FALSE(apply_ablation([&] { t.ablation = Ablation::NoAutoCross; return t; }()).features.autocross);
    CHECK_FALSE(apply_ablation([&] { t.ablation = Ablation::NoSpectro; return t; }()).features.spectro);
}

TEST_CASE("run: bookkeeping, temporal audit and determinism") {
    const RunConfig config = small_config();
    const FeatureFrame frame = load_frame(config);
    const RunResult a = run(frame, trainer_of(config));
    CHECK(a.state.epochs_completed == 4);
    CHECK(a.state.history.size() == 4 * 4);  // weeks x (three experts + ensemble)
    CHECK(a.summary.size() == 4);
    CHECK(a.state.gate_history.size() == 4);
    for (const auto& row : a.state.audit) {
        CHECK(row.temporal_ok);
        CHECK(row.max_batch_week <= row.week);
        CHECK(row.max_buffer_week < row.week);
    }
    for (const auto& g : a.state.gate_history) {
        CHECK(std::accumulate(g.weights.begin(), g.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const RunResult b = run(frame, trainer_of(config));
    CHECK(a.state.fingerprint() == b.state.fingerprint());
    CHECK(metrics_csv(a.state.history) == metrics_csv(b.state.history));
}

TEST_CASE("run: a failing stage leaves the state untouched") {
    const RunConfig config = small_config();
    const FeatureFrame frame = load_frame(config);
    const RunContext context = prepare_run(frame, trainer_of(config));
    RunState state = initial_state(context);
    state = run_epoch(state, context, 1);
    state = run_epoch(state, context, 2);
    const std::uint64_t before = state.fingerprint();
    for (const char* stage : {"batch", "goss", "ordered", "dense", "gate"}) {
        const EpochHook hook = [stage](std::string_view s, int) {
            if (s == stage) throw DataError("injected");
        };
        CHECK_THROWS_AS(run_epoch(state, context, 3, hook), TrainingError);
        CHECK(state.fingerprint() == before);
    }
    const RunState next = run_epoch(state, context, 3);
    CHECK(next.epochs_completed == 3);
    CHECK(next.fingerprint() != before);
}

TEST_CASE("run: single week and baseline mode") {
    RunConfig config = small_config();
    set_config_value(config, "synthetic.weeks", "1");
    set_config_value(config, "synthetic.drift", "");
    set_config_value(config, "trainer.burn_in_weeks", "1");
    const FeatureFrame one = load_frame(config);
    const RunResult r = run(one, trainer_of(config));
    CHECK(r.state.epochs_completed == 1);
    CHECK(r.state.gate_history.size() == 1);
    CHECK(std::isnan(r.summary.back().report.gini_stable));

    RunConfig bare = small_config();
    set_config_value(bare, "features.graph", "false");
    set_config_value(bare, "features.autocross", "false");
    set_config_value(bare, "features.spectro", "false");
    const RunResult base = run(load_frame(bare), trainer_of(bare));
    CHECK(base.state.history.size() == 16);
    CHECK(base.ledger.accepted.empty());
}

TEST_CASE("run: two identical weeks do not get worse") {
    RunConfig config = small_config();
    set_config_value(config, "synthetic.weeks", "1");
    set_config_value(config, "synthetic.drift", "");
    set_config_value(config, "synthetic.rows_per_week", "300");
    set_config_value(config, "trainer.burn_in_weeks", "1");
    const FeatureFrame week = load_frame(config);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(2 * week.rows()));
    for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = static_cast<Eigen::Index>(k) % week.rows();
    FeatureFrame twice = select_rows(week, rows);
    for (Eigen::Index i = week.rows(); i < twice.rows(); ++i) twice.week(i) = 2;
    const RunResult r = run(twice, trainer_of(config));
    std::map<ModelId, std::vector<double>> loss;
    for (const auto& m : r.state.history) loss[m.model].push_back(m.log_loss);
    for (const auto& [model, values] : loss) {
        REQUIRE(values.size() == 2);
        CHECK(values[1] <= values[0] + 0.02);
    }
}
