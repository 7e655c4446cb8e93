#include "hydra/graph_synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hydra/random.hpp"

namespace hydra {

int ClientGraph::max_degree() const {
    std::size_t deg = 0;
    for (const auto& n : neighbors) deg = std::max(deg, n.size());
    return static_cast<int>(deg);
}

ClientGraph build_graph(const FeatureFrame& frame, Eigen::MatrixXd node_features, const GraphOptions& options) {
    if (options.max_neighbors < 0) throw ConfigError("graph.max_neighbors must be non-negative");
    if (node_features.rows() != frame.rows()) throw ShapeError("graph: node features and frame differ in rows");
    const auto keys = options.key_columns.empty() ? frame.schema.key_columns : options.key_columns;
    if (keys.empty()) throw ConfigError("graph construction needs at least one key column");

    const Eigen::Index n = frame.rows();
    // members of every (key column, code) group, in ascending hash order
    std::vector<std::vector<std::vector<Eigen::Index>>> groups;
    std::vector<Eigen::Index> key_index;
    for (const auto& key : keys) {
        const auto col = frame.categorical_index(key);
        key_index.push_back(col);
        std::unordered_map<std::int32_t, std::vector<Eigen::Index>> members;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto code = frame.categorical(i, col);
            if (code == kMissingCode || code == kUnknownCode) continue;
            members[code].push_back(i);
        }
        std::vector<std::vector<Eigen::Index>> by_code(
            static_cast<std::size_t>(frame.vocabularies[static_cast<std::size_t>(col)].size()));
        for (auto& [code, rows] : members) by_code[static_cast<std::size_t>(code)] = std::move(rows);
        groups.push_back(std::move(by_code));
    }
    auto hash_of = [&](Eigen::Index j) { return mix64(options.seed, static_cast<std::uint64_t>(j)); };
    auto hash_less = [&](Eigen::Index a, Eigen::Index b) {
        const auto ha = hash_of(a), hb = hash_of(b);
        return ha != hb ? ha < hb : a < b;
    };
    for (auto& by_code : groups) {
        for (auto& rows : by_code) std::sort(rows.begin(), rows.end(), hash_less);
    }

    ClientGraph graph;
    graph.features = std::move(node_features);
    graph.max_neighbors = options.max_neighbors;
    graph.key_columns = keys;
    graph.neighbors.resize(static_cast<std::size_t>(n));
    const auto cap = static_cast<std::size_t>(options.max_neighbors);
    std::vector<Eigen::Index> candidates;
    for (Eigen::Index i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t k = 0; k < keys.size(); ++k) {
            const auto code = frame.categorical(i, key_index[k]);
            if (code == kMissingCode || code == kUnknownCode) continue;
            // each group is hash-ordered, so its first `cap` eligible members suffice
            std::size_t taken = 0;
            for (auto j : groups[k][static_cast<std::size_t>(code)]) {
                if (taken >= cap) break;
                if (j == i) continue;
                if (options.causal && frame.week(j) > frame.week(i)) continue;
                candidates.push_back(j);
                ++taken;
            }
        }
        std::sort(candidates.begin(), candidates.end(), hash_less);
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        if (candidates.size() > cap) candidates.resize(cap);
        auto& list = graph.neighbors[static_cast<std::size_t>(i)];
        list.assign(candidates.begin(), candidates.end());
        list.push_back(i);
        std::sort(list.begin(), list.end());
    }
    return graph;
}

ClientGraph induced_subgraph(const ClientGraph& graph, std::span<const Eigen::Index> nodes) {
    std::unordered_map<Eigen::Index, Eigen::Index> remap;
    for (std::size_t k = 0; k < nodes.size(); ++k) remap.emplace(nodes[k], static_cast<Eigen::Index>(k));
    ClientGraph sub;
    sub.max_neighbors = graph.max_neighbors;
    sub.key_columns = graph.key_columns;
    sub.features.resize(static_cast<Eigen::Index>(nodes.size()), graph.features.cols());
    sub.neighbors.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        sub.features.row(static_cast<Eigen::Index>(k)) = graph.features.row(nodes[k]);
        for (auto j : graph.neighbors[static_cast<std::size_t>(nodes[k])]) {
            auto it = remap.find(j);
            if (it != remap.end()) sub.neighbors[k].push_back(it->second);
        }
        std::sort(sub.neighbors[k].begin(), sub.neighbors[k].end());
    }
    return sub;
}

// ---------------------------------------------------------------------------
// Model

void GatConfig::validate() const {
    if (heads < 1 || hidden < 1 || embedding < 1) throw ConfigError("gat dimensions must be positive");
    if (epochs < 0) throw ConfigError("gat.epochs must be non-negative");
    if (!(learning_rate >= 0.0)) throw ConfigError("gat.learning_rate must be non-negative");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("gat.leaky_slope must lie in [0, 1)");
}

namespace {

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
    }
    return m;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace

GatModel GatModel::initialize(Eigen::Index input_dim, const GatConfig& config) {
    config.validate();
    Rng rng(config.seed);
    GatModel m;
    m.heads = config.heads;
    m.hidden = config.hidden;
    m.embedding = config.embedding;
    m.leaky_slope = config.leaky_slope;
    m.w0 = glorot(input_dim, config.heads * config.hidden, rng);
    m.a0_src = glorot(config.heads, config.hidden, rng);
    m.a0_dst = glorot(config.heads, config.hidden, rng);
    m.w1 = glorot(config.heads * config.hidden, config.heads * config.embedding, rng);
    m.a1_src = glorot(config.heads, config.embedding, rng);
    m.a1_dst = glorot(config.heads, config.embedding, rng);
    m.head_w = glorot(config.embedding, 1, rng).col(0);
    m.head_b = 0.0;
    return m;
}

Eigen::Index GatModel::parameter_count() const {
    return w0.size() + a0_src.size() + a0_dst.size() + w1.size() + a1_src.size() + a1_dst.size() + head_w.size() + 1;
}

Eigen::VectorXd GatModel::flatten() const {
    Eigen::VectorXd p(parameter_count());
    Eigen::Index o = 0;
    for (const Eigen::MatrixXd* m : {&w0, &a0_src, &a0_dst, &w1, &a1_src, &a1_dst}) {
        p.segment(o, m->size()) = m->reshaped();
        o += m->size();
    }
    p.segment(o, head_w.size()) = head_w;
    o += head_w.size();
    p(o) = head_b;
    return p;
}

void GatModel::unflatten(const Eigen::Ref<const Eigen::VectorXd>& p) {
    if (p.size() != parameter_count()) throw ShapeError("gat: parameter vector has the wrong length");
    Eigen::Index o = 0;
    for (Eigen::MatrixXd* m : {&w0, &a0_src, &a0_dst, &w1, &a1_src, &a1_dst}) {
        m->reshaped() = p.segment(o, m->size());
        o += m->size();
    }
    head_w = p.segment(o, head_w.size());
    o += head_w.size();
    head_b = p(o);
}

// ---------------------------------------------------------------------------
// Forward and backward

namespace {

struct Csr {
    std::vector<Eigen::Index> offsets;
    std::vector<Eigen::Index> cols;
};

Csr to_csr(const ClientGraph& graph) {
    Csr csr;
    csr.offsets.push_back(0);
    for (const auto& list : graph.neighbors) {
        csr.cols.insert(csr.cols.end(), list.begin(), list.end());
        csr.offsets.push_back(static_cast<Eigen::Index>(csr.cols.size()));
    }
    return csr;
}

/// One multi-head attention aggregation: M_i^h = sum_j alpha_ij^h Z_j^h.
struct AttentionLayer {
    Eigen::MatrixXd z;      // N x H*D
    Eigen::MatrixXd raw;    // E x H, pre-LeakyReLU scores
    Eigen::MatrixXd alpha;  // E x H
    Eigen::MatrixXd m;      // N x H*D
};

AttentionLayer attend(const Csr& csr, Eigen::MatrixXd z, const Eigen::MatrixXd& a_src, const Eigen::MatrixXd& a_dst,
                      double slope) {
    const Eigen::Index n = z.rows(), heads = a_src.rows(), d = a_src.cols();
    const auto e = static_cast<Eigen::Index>(csr.cols.size());
    AttentionLayer layer;
    Eigen::MatrixXd src(n, heads), dst(n, heads);
    for (Eigen::Index h = 0; h < heads; ++h) {
        src.col(h) = z.middleCols(h * d, d) * a_src.row(h).transpose();
        dst.col(h) = z.middleCols(h * d, d) * a_dst.row(h).transpose();
    }
    layer.raw.resize(e, heads);
    layer.alpha.resize(e, heads);
    layer.m = Eigen::MatrixXd::Zero(n, heads * d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto lo = csr.offsets[static_cast<std::size_t>(i)], hi = csr.offsets[static_cast<std::size_t>(i + 1)];
        for (Eigen::Index h = 0; h < heads; ++h) {
            double top = -INFINITY;
            for (auto k = lo; k < hi; ++k) {
                const double r = src(i, h) + dst(csr.cols[static_cast<std::size_t>(k)], h);
                layer.raw(k, h) = r;
                top = std::max(top, r > 0.0 ? r : slope * r);
            }
            double total = 0.0;
            for (auto k = lo; k < hi; ++k) {
                const double r = layer.raw(k, h);
                const double a = std::exp((r > 0.0 ? r : slope * r) - top);
                layer.alpha(k, h) = a;
                total += a;
            }
            for (auto k = lo; k < hi; ++k) {
                layer.alpha(k, h) /= total;
                layer.m.row(i).segment(h * d, d) +=
                    layer.alpha(k, h) * z.row(csr.cols[static_cast<std::size_t>(k)]).segment(h * d, d);
            }
        }
    }
    layer.z = std::move(z);
    return layer;
}

/// Back-propagates dM into dZ and the attention vectors.
void attend_backward(const Csr& csr, const AttentionLayer& layer, const Eigen::MatrixXd& a_src,
                     const Eigen::MatrixXd& a_dst, double slope, const Eigen::MatrixXd& dm, Eigen::MatrixXd& dz,
                     Eigen::MatrixXd& da_src, Eigen::MatrixXd& da_dst) {
    const Eigen::Index n = layer.z.rows(), heads = a_src.rows(), d = a_src.cols();
    dz = Eigen::MatrixXd::Zero(n, heads * d);
    Eigen::MatrixXd dsrc = Eigen::MatrixXd::Zero(n, heads), ddst = Eigen::MatrixXd::Zero(n, heads);
    std::vector<double> dalpha;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto lo = csr.offsets[static_cast<std::size_t>(i)], hi = csr.offsets[static_cast<std::size_t>(i + 1)];
        dalpha.resize(static_cast<std::size_t>(hi - lo));
        for (Eigen::Index h = 0; h < heads; ++h) {
            const auto dmi = dm.row(i).segment(h * d, d);
            double weighted = 0.0;
            for (auto k = lo; k < hi; ++k) {
                const auto j = csr.cols[static_cast<std::size_t>(k)];
                dz.row(j).segment(h * d, d) += layer.alpha(k, h) * dmi;
                const double da = dmi.dot(layer.z.row(j).segment(h * d, d));
                dalpha[static_cast<std::size_t>(k - lo)] = da;
                weighted += layer.alpha(k, h) * da;
            }
            for (auto k = lo; k < hi; ++k) {
                const auto j = csr.cols[static_cast<std::size_t>(k)];
                const double de = layer.alpha(k, h) * (dalpha[static_cast<std::size_t>(k - lo)] - weighted);
                const double dr = layer.raw(k, h) > 0.0 ? de : slope * de;
                dsrc(i, h) += dr;
                ddst(j, h) += dr;
            }
        }
    }
    da_src.resize(heads, d);
    da_dst.resize(heads, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
        const auto zh = layer.z.middleCols(h * d, d);
        da_src.row(h) = dsrc.col(h).transpose() * zh;
        da_dst.row(h) = ddst.col(h).transpose() * zh;
        dz.middleCols(h * d, d) += dsrc.col(h) * a_src.row(h) + ddst.col(h) * a_dst.row(h);
    }
}

struct ForwardCache {
    Csr csr;
    AttentionLayer l1;
    Eigen::MatrixXd agg1;
    Eigen::MatrixXd h1;
    AttentionLayer l2;
    Eigen::MatrixXd agg2;
    Eigen::MatrixXd h2;
    Eigen::VectorXd logits;
};

ForwardCache forward_cached(const GatModel& model, const ClientGraph& graph) {
    if (graph.features.cols() != model.input_dim()) {
        throw ShapeError("gat: node feature dimension " + std::to_string(graph.features.cols()) +
                         " does not match model input " + std::to_string(model.input_dim()));
    }
    if (static_cast<Eigen::Index>(graph.neighbors.size()) != graph.nodes()) {
        throw ShapeError("gat: neighbor lists do not cover every node");
    }
    ForwardCache c;
    c.csr = to_csr(graph);
    c.l1 = attend(c.csr, graph.features * model.w0, model.a0_src, model.a0_dst, model.leaky_slope);
    c.agg1 = c.l1.m;
    c.h1 = c.agg1.unaryExpr(&elu);
    c.l2 = attend(c.csr, c.h1 * model.w1, model.a1_src, model.a1_dst, model.leaky_slope);
    const Eigen::Index f2 = model.embedding;
    c.agg2 = Eigen::MatrixXd::Zero(graph.nodes(), f2);
    for (int h = 0; h < model.heads; ++h) c.agg2 += c.l2.m.middleCols(h * f2, f2);
    c.agg2 /= static_cast<double>(model.heads);
    c.h2 = c.agg2.unaryExpr(&elu);
    c.logits = (c.h2 * model.head_w).array() + model.head_b;
    return c;
}

double masked_bce(const Eigen::VectorXd& logits, const Eigen::VectorXi& labels, const std::vector<bool>& mask,
                  Eigen::VectorXd* dlogits) {
    double count = 0.0;
    for (bool m : mask) count += m ? 1.0 : 0.0;
    if (dlogits) *dlogits = Eigen::VectorXd::Zero(logits.size());
    if (count == 0.0) return 0.0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const double z = logits(i);
        // log(1 + e^z) - y z, evaluated stably
        loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - labels(i) * z;
        if (dlogits) (*dlogits)(i) = (sigmoid(z) - labels(i)) / count;
    }
    return loss / count;
}

void check_labels(const ClientGraph& graph, const Eigen::VectorXi& labels, const std::vector<bool>& mask) {
    if (labels.size() != graph.nodes() || static_cast<Eigen::Index>(mask.size()) != graph.nodes()) {
        throw ShapeError("gat: labels and mask must cover every node");
    }
}

}  // namespace

GatForward gat_forward(const GatModel& model, const ClientGraph& graph) {
    auto c = forward_cached(model, graph);
    GatForward f;
    f.offsets = std::move(c.csr.offsets);
    f.alpha0 = std::move(c.l1.alpha);
    f.alpha1 = std::move(c.l2.alpha);
    f.h1 = std::move(c.h1);
    f.h2 = std::move(c.h2);
    f.logits = std::move(c.logits);
    return f;
}

double gat_loss(const GatModel& model, const ClientGraph& graph, const Eigen::VectorXi& labels,
                const std::vector<bool>& mask) {
    check_labels(graph, labels, mask);
    return masked_bce(forward_cached(model, graph).logits, labels, mask, nullptr);
}

GatGradient gat_loss_gradient(const GatModel& model, const ClientGraph& graph, const Eigen::VectorXi& labels,
                              const std::vector<bool>& mask) {
    check_labels(graph, labels, mask);
    const auto c = forward_cached(model, graph);
    GatGradient out;
    Eigen::VectorXd dlogits;
    out.loss = masked_bce(c.logits, labels, mask, &dlogits);

    GatModel grad = model;
    grad.head_w = c.h2.transpose() * dlogits;
    grad.head_b = dlogits.sum();
    const Eigen::MatrixXd dh2 = dlogits * model.head_w.transpose();
    const Eigen::MatrixXd dagg2 = dh2.cwiseProduct(c.agg2.unaryExpr(&elu_grad));

    const Eigen::Index f2 = model.embedding;
    Eigen::MatrixXd dm2(graph.nodes(), model.heads * f2);
    for (int h = 0; h < model.heads; ++h) dm2.middleCols(h * f2, f2) = dagg2 / static_cast<double>(model.heads);
    Eigen::MatrixXd dz2;
    attend_backward(c.csr, c.l2, model.a1_src, model.a1_dst, model.leaky_slope, dm2, dz2, grad.a1_src, grad.a1_dst);
    grad.w1 = c.h1.transpose() * dz2;
    const Eigen::MatrixXd dh1 = dz2 * model.w1.transpose();
    const Eigen::MatrixXd dagg1 = dh1.cwiseProduct(c.agg1.unaryExpr(&elu_grad));

    Eigen::MatrixXd dz1;
    attend_backward(c.csr, c.l1, model.a0_src, model.a0_dst, model.leaky_slope, dagg1, dz1, grad.a0_src, grad.a0_dst);
    grad.w0 = graph.features.transpose() * dz1;
    out.gradient = grad.flatten();
    return out;
}

GatModel gat_train(const ClientGraph& graph, const Eigen::VectorXi& labels, const std::vector<bool>& train_mask,
                   const std::vector<bool>& validation_mask, const GatConfig& config, GatTrainLog* log) {
    config.validate();
    check_labels(graph, labels, train_mask);
    const bool has_validation = std::find(validation_mask.begin(), validation_mask.end(), true) != validation_mask.end();
    if (has_validation) check_labels(graph, labels, validation_mask);

    GatModel model = GatModel::initialize(graph.features.cols(), config);
    Eigen::VectorXd params = model.flatten();
    Eigen::VectorXd best = params;
    double best_loss = INFINITY;
    GatTrainLog local;
    for (int epoch = 0; epoch <= config.epochs; ++epoch) {
        model.unflatten(params);
        const auto step = gat_loss_gradient(model, graph, labels, train_mask);
        const double val = has_validation ? gat_loss(model, graph, labels, validation_mask) : step.loss;
        if (!std::isfinite(step.loss) || !std::isfinite(val)) {
            throw TrainingError("gat training diverged at epoch " + std::to_string(epoch) + " (train loss " +
                                std::to_string(step.loss) + ", validation loss " + std::to_string(val) + ")");
        }
        local.train_loss.push_back(step.loss);
        local.validation_loss.push_back(val);
        if (val < best_loss) {
            best_loss = val;
            best = params;
            local.best_epoch = epoch;
        }
        // the last pass only scores the final update
        if (epoch < config.epochs) params -= config.learning_rate * step.gradient;
    }
    model.unflatten(best);
    if (log) *log = std::move(local);
    return model;
}

Eigen::MatrixXd embed(const GatModel& model, const ClientGraph& graph) { return forward_cached(model, graph).h2; }

std::vector<std::string> embedding_feature_names(const GatModel& model) {
    std::vector<std::string> names;
    for (int k = 0; k < model.embedding; ++k) names.push_back("gat_z" + std::to_string(k));
    return names;
}

}  // namespace hydra
