#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hydra/errors.hpp"
#include "hydra/graph_synth.hpp"

using namespace hydra;

namespace {

FeatureFrame keyed_frame(const std::vector<std::string>& tokens) {
    std::vector<int> labels(tokens.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
    FeatureFrame frame = test::categorical_frame(tokens, labels);
    frame.schema.key_columns = {"cat"};
    return frame;
}

double elu(double x) { return x > 0 ? x : std::expm1(x); }
double leaky(double x, double s) { return x > 0 ? x : s * x; }

// Per-edge recomputation of both attention layers straight from the
// definitions, one node and head at a time.
Eigen::MatrixXd naive_embedding(const GatModel& m, const ClientGraph& g) {
    const Eigen::Index n = g.nodes();
    auto layer = [&](const Eigen::MatrixXd& input, const Eigen::MatrixXd& w, const Eigen::MatrixXd& as,
                     const Eigen::MatrixXd& ad, int d) {
        const Eigen::MatrixXd z = input * w;
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m.heads * d);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int h = 0; h < m.heads; ++h) {
                const auto& nb = g.neighbors[static_cast<std::size_t>(i)];
                std::vector<double> score;
                double total = 0;
                for (auto j : nb) {
                    const double e = std::exp(leaky(as.row(h).dot(z.row(i).segment(h * d, d)) +
                                                        ad.row(h).dot(z.row(j).segment(h * d, d)),
                                                    m.leaky_slope));
                    score.push_back(e);
                    total += e;
                }
                for (std::size_t k = 0; k < nb.size(); ++k) {
                    out.row(i).segment(h * d, d) += score[k] / total * z.row(nb[k]).segment(h * d, d);
                }
            }
        }
        return out;
    };
    const Eigen::MatrixXd h1 = layer(g.features, m.w0, m.a0_src, m.a0_dst, m.hidden).unaryExpr(&elu);
    const Eigen::MatrixXd m2 = layer(h1, m.w1, m.a1_src, m.a1_dst, m.embedding);
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, m.embedding);
    for (int h = 0; h < m.heads; ++h) avg += m2.middleCols(h * m.embedding, m.embedding);
    return (avg / m.heads).unaryExpr(&elu);
}

ClientGraph random_graph(Rng& rng, Eigen::Index n, Eigen::Index f) {
    ClientGraph g;
    g.features.resize(n, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < f; ++j) g.features(i, j) = rng.normal();
    }
    g.neighbors.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& nb = g.neighbors[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || rng.bernoulli(0.4)) nb.push_back(j);
        }
    }
    return g;
}

}  // namespace

TEST_CASE("graph: a shared employer forms a clique with self-loops") {
    const FeatureFrame frame = keyed_frame({"acme", "acme", "acme"});
    const ClientGraph g = build_graph(frame, Eigen::MatrixXd::Zero(3, 1), {});
    for (const auto& nb : g.neighbors) CHECK(nb == std::vector<Eigen::Index>{0, 1, 2});
}

TEST_CASE("graph: no shared values leaves only self-loops") {
    const FeatureFrame frame = keyed_frame({"a", "b", "c", "d"});
    const ClientGraph g = build_graph(frame, Eigen::MatrixXd::Zero(4, 1), {});
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.neighbors[i] == std::vector<Eigen::Index>{static_cast<Eigen::Index>(i)});
}

TEST_CASE("graph: degree cap holds for a crowded merchant") {
    const FeatureFrame frame = keyed_frame(std::vector<std::string>(100, "shop"));
    GraphOptions options;
    options.max_neighbors = 8;
    const ClientGraph g = build_graph(frame, Eigen::MatrixXd::Zero(100, 1), options);
    for (std::size_t i = 0; i < 100; ++i) {
        const auto& nb = g.neighbors[i];
        CHECK(nb.size() == 9);
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
        CHECK(std::find(nb.begin(), nb.end(), static_cast<Eigen::Index>(i)) != nb.end());
    }
    CHECK(g.max_degree() <= 9);
}

TEST_CASE("graph: missing key columns is a configuration error") {
    FeatureFrame frame = keyed_frame({"a", "b"});
    frame.schema.key_columns.clear();
    CHECK_THROWS_AS(build_graph(frame, Eigen::MatrixXd::Zero(2, 1), {}), ConfigError);
}

TEST_CASE("gat: singleton attention reduces to a per-node transform") {
    GatConfig config;
    config.heads = 2;
    config.hidden = 3;
    config.embedding = 2;
    config.seed = 4;
    const GatModel model = GatModel::initialize(2, config);
    ClientGraph g;
    g.features = Eigen::MatrixXd(1, 2);
    g.features << 0.3, -1.2;
    g.neighbors = {{0}};
    const GatForward f = gat_forward(model, g);
    CHECK((f.alpha0.array() == 1.0).all());
    CHECK((f.alpha1.array() == 1.0).all());
    const Eigen::RowVectorXd expected = (g.features * model.w0).unaryExpr(&elu);
    CHECK(f.h1.isApprox(expected, 1e-14));
    CHECK(f.h2.allFinite());
}

TEST_CASE("gat: identical clique members get identical embeddings") {
    const GatModel model = GatModel::initialize(3, GatConfig{});
    ClientGraph g;
    g.features = Eigen::MatrixXd::Ones(4, 3) * 0.7;
    g.neighbors.assign(4, {0, 1, 2, 3});
    const Eigen::MatrixXd z = embed(model, g);
    for (Eigen::Index i = 1; i < 4; ++i) CHECK((z.row(i) - z.row(0)).norm() == 0.0);
}

TEST_CASE("gat: attention normalizes and the forward pass matches a naive recomputation") {
    Rng rng(31);
    const ClientGraph g = random_graph(rng, 5, 3);
    GatConfig config;
    config.heads = 2;
    config.hidden = 4;
    config.embedding = 3;
    config.seed = 8;
    const GatModel model = GatModel::initialize(3, config);
    const GatForward f = gat_forward(model, g);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index h = 0; h < 2; ++h) {
            const auto lo = f.offsets[static_cast<std::size_t>(i)], hi = f.offsets[static_cast<std::size_t>(i + 1)];
            CHECK(std::abs(f.alpha0.col(h).segment(lo, hi - lo).sum() - 1.0) < 1e-12);
            CHECK(std::abs(f.alpha1.col(h).segment(lo, hi - lo).sum() - 1.0) < 1e-12);
        }
    }
    CHECK((f.h2 - naive_embedding(model, g)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gat: relabeling nodes permutes the embeddings") {
    Rng rng(32);
    const ClientGraph g = random_graph(rng, 6, 3);
    const GatModel model = GatModel::initialize(3, GatConfig{});
    const std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};  // new node k is old node perm[k]
    std::vector<Eigen::Index> inverse(6);
    for (Eigen::Index k = 0; k < 6; ++k) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
    ClientGraph p;
    p.features.resize(6, 3);
    p.neighbors.resize(6);
    for (Eigen::Index k = 0; k < 6; ++k) {
        const auto old = perm[static_cast<std::size_t>(k)];
        p.features.row(k) = g.features.row(old);
        for (auto j : g.neighbors[static_cast<std::size_t>(old)]) p.neighbors[static_cast<std::size_t>(k)].push_back(inverse[static_cast<std::size_t>(j)]);
        std::sort(p.neighbors[static_cast<std::size_t>(k)].begin(), p.neighbors[static_cast<std::size_t>(k)].end());
    }
    const Eigen::MatrixXd z = embed(model, g), zp = embed(model, p);
    for (Eigen::Index k = 0; k < 6; ++k) CHECK((zp.row(k) - z.row(perm[static_cast<std::size_t>(k)])).norm() < 1e-12);
}

TEST_CASE("gat: gradients match central differences on a 10-node graph") {
    Rng rng(33);
    const ClientGraph g = random_graph(rng, 10, 4);
    Eigen::VectorXi labels(10);
    for (Eigen::Index i = 0; i < 10; ++i) labels(i) = static_cast<int>(i % 3 == 0);
    std::vector<bool> mask(10, true);
    mask[4] = false;
    GatConfig config;
    config.heads = 2;
    config.hidden = 3;
    config.embedding = 2;
    GatModel model = GatModel::initialize(4, config);
    const Eigen::VectorXd params = model.flatten();
    const auto analytic = gat_loss_gradient(model, g, labels, mask).gradient;
    Eigen::VectorXd numeric(params.size());
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        Eigen::VectorXd p = params;
        p(k) += 1e-6;
        model.unflatten(p);
        const double up = gat_loss(model, g, labels, mask);
        p(k) -= 2e-6;
        model.unflatten(p);
        numeric(k) = (up - gat_loss(model, g, labels, mask)) / 2e-6;
    }
    CHECK((analytic - numeric).norm() / (analytic.norm() + numeric.norm()) < 1e-4);
}

TEST_CASE("gat training: descent on a separable toy graph and lr 0 identity") {
    ClientGraph g;
    g.features = Eigen::MatrixXd(6, 2);
    g.features << 1, 0.2, 1.1, 0.1, 0.9, 0.3, -1, -0.2, -1.1, 0.1, -0.9, -0.3;
    g.neighbors = {{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {3, 4, 5}, {3, 4, 5}, {3, 4, 5}};
    Eigen::VectorXi labels(6);
    labels << 1, 1, 1, 0, 0, 0;
    const std::vector<bool> all(6, true), none(6, false);
    GatConfig config;
    config.epochs = 10;
    config.learning_rate = 0.01;
    config.heads = 2;
    config.hidden = 4;
    config.embedding = 2;
    GatTrainLog log;
    gat_train(g, labels, all, none, config, &log);
    REQUIRE(log.train_loss.size() >= 10);
    for (std::size_t e = 1; e < 10; ++e) CHECK(log.train_loss[e] < log.train_loss[e - 1]);

    config.learning_rate = 0.0;
    const GatModel still = gat_train(g, labels, all, none, config);
    CHECK(still.flatten() == GatModel::initialize(2, config).flatten());
}
