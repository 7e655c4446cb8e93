#include "hydra/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hydra/format.hpp"
#include "hydra/random.hpp"

namespace hydra {

std::string_view to_string(BoosterVariant variant) { return variant == BoosterVariant::Goss ? "goss" : "ordered"; }

BoosterVariant parse_booster_variant(std::string_view text) {
    if (text == "goss") return BoosterVariant::Goss;
    if (text == "ordered") return BoosterVariant::Ordered;
    throw ConfigError("unknown booster variant \"" + std::string(text) + "\"");
}

void BoosterConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("gbdt.learning_rate must be non-negative");
    if (!(lambda >= 0.0)) throw ConfigError("gbdt.lambda must be non-negative");
    if (max_bin < 2 || max_bin > 255) throw ConfigError("gbdt.max_bin must lie in [2, 255]");
    if (max_leaves < 2) throw ConfigError("gbdt.max_leaves must be at least 2");
    if (min_data_in_leaf < 1) throw ConfigError("gbdt.min_data_in_leaf must be positive");
    if (variant == BoosterVariant::Goss) {
        if (!(goss_top_rate > 0.0 && goss_top_rate <= 1.0)) throw ConfigError("GOSS top rate must lie in (0, 1]");
        if (!(goss_other_rate >= 0.0) || goss_top_rate + goss_other_rate > 1.0 + 1e-12) {
            throw ConfigError("GOSS rates must satisfy b >= 0 and a + b <= 1");
        }
        if (goss_other_rate == 0.0 && goss_top_rate < 1.0) {
            throw ConfigError("GOSS with b = 0 and a < 1 leaves small gradients unrepresented");
        }
    }
}

GradHess logloss_grad_hess(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& margins) {
    GradHess gh;
    gh.grad.resize(margins.size());
    gh.hess.resize(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double p = sigmoid(margins(i));
        gh.grad(i) = p - labels(i);
        gh.hess(i) = std::max(p * (1.0 - p), 1e-16);
    }
    return gh;
}

GossSample goss_sample(const Eigen::Ref<const Eigen::VectorXd>& grad_magnitudes, double top_rate, double other_rate,
                       std::uint64_t seed) {
    if (!(top_rate > 0.0 && top_rate <= 1.0) || !(other_rate >= 0.0) || top_rate + other_rate > 1.0 + 1e-12) {
        throw ConfigError("GOSS rates must satisfy 0 < a <= 1, b >= 0, a + b <= 1");
    }
    if (other_rate == 0.0 && top_rate < 1.0) {
        throw ConfigError("GOSS with b = 0 and a < 1 leaves small gradients unrepresented");
    }
    const auto n = static_cast<std::size_t>(grad_magnitudes.size());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return std::abs(grad_magnitudes(a)) > std::abs(grad_magnitudes(b));
    });
    const auto top = std::min(n, static_cast<std::size_t>(std::floor(top_rate * static_cast<double>(n) + 1e-9)));
    const auto rest = n - top;
    const auto other = std::min(rest, static_cast<std::size_t>(std::floor(other_rate * static_cast<double>(n) + 1e-9)));

    // partial Fisher-Yates over the small-gradient tail
    Rng rng(seed);
    for (std::size_t k = 0; k < other; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.index(rest - k));
        std::swap(order[top + k], order[top + j]);
    }
    const double amplify = other > 0 ? (1.0 - top_rate) / other_rate : 1.0;
    std::vector<std::pair<Eigen::Index, double>> kept;
    kept.reserve(top + other);
    for (std::size_t k = 0; k < top; ++k) kept.emplace_back(order[k], 1.0);
    for (std::size_t k = 0; k < other; ++k) kept.emplace_back(order[top + k], amplify);
    std::sort(kept.begin(), kept.end());

    GossSample sample;
    sample.top_count = top;
    sample.rows.reserve(kept.size());
    sample.weights.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        sample.rows.push_back(kept[k].first);
        sample.weights(static_cast<Eigen::Index>(k)) = kept[k].second;
    }
    return sample;
}

// ---------------------------------------------------------------------------
// Binning

BinMapper BinMapper::fit(const Eigen::MatrixXd& features, int max_bin) {
    BinMapper mapper;
    mapper.edges_.resize(static_cast<std::size_t>(features.cols()));
    std::vector<double> values;
    for (Eigen::Index f = 0; f < features.cols(); ++f) {
        values.clear();
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            if (!std::isnan(features(i, f))) values.push_back(features(i, f));
        }
        std::sort(values.begin(), values.end());
        std::vector<double> unique = values;
        unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
        auto& edges = mapper.edges_[static_cast<std::size_t>(f)];
        if (static_cast<int>(unique.size()) <= max_bin) {
            for (std::size_t k = 1; k < unique.size(); ++k) edges.push_back(0.5 * (unique[k - 1] + unique[k]));
        } else {
            for (int b = 1; b < max_bin; ++b) edges.push_back(quantile_sorted(values, static_cast<double>(b) / max_bin));
            edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
            // the top edge must leave something on its right
            while (!edges.empty() && edges.back() >= unique.back()) edges.pop_back();
        }
    }
    return mapper;
}

BinMapper BinMapper::from_edges(std::vector<std::vector<double>> edges) {
    BinMapper mapper;
    mapper.edges_ = std::move(edges);
    return mapper;
}

std::uint8_t BinMapper::bin(Eigen::Index feature, double value) const {
    if (std::isnan(value)) return 0;
    const auto& e = edges_[static_cast<std::size_t>(feature)];
    return static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

std::vector<std::uint8_t> BinMapper::transform(const Eigen::MatrixXd& features) const {
    if (features.cols() != this->features()) throw ShapeError("bin mapper: feature count mismatch");
    const Eigen::Index n = features.rows();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n * features.cols()));
    for (Eigen::Index f = 0; f < features.cols(); ++f) {
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(f * n + i)] = bin(f, features(i, f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trees

double Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int k = 0;
    while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
        const auto& node = nodes[static_cast<std::size_t>(k)];
        k = row(node.feature) > node.threshold ? node.right : node.left;
    }
    return nodes[static_cast<std::size_t>(k)].value;
}

int Tree::depth() const {
    std::vector<int> depth(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto& node = nodes[k];
        if (node.is_leaf()) continue;
        depth[static_cast<std::size_t>(node.left)] = depth[k] + 1;
        depth[static_cast<std::size_t>(node.right)] = depth[k] + 1;
        deepest = std::max(deepest, depth[k] + 1);
    }
    return deepest;
}

namespace {

struct Bucket {
    double grad = 0.0;
    double hess = 0.0;
    Eigen::Index count = 0;
};

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
    double grad_left = 0.0;
    double hess_left = 0.0;
    Eigen::Index count_left = 0;
};

struct LeafState {
    int node = 0;
    int depth = 0;
    std::vector<Eigen::Index> rows;
    std::vector<Bucket> hist;
    double grad = 0.0;
    double hess = 0.0;
    SplitChoice best;
};

class TreeGrower {
public:
    TreeGrower(const BinMapper& bins, std::span<const std::uint8_t> binned, Eigen::Index total_rows,
               const Eigen::VectorXd& grad, const Eigen::VectorXd& hess, const BoosterConfig& config)
        : bins_(bins), binned_(binned), total_rows_(total_rows), grad_(grad), hess_(hess), config_(config) {
        offsets_.push_back(0);
        for (Eigen::Index f = 0; f < bins.features(); ++f) offsets_.push_back(offsets_.back() + static_cast<std::size_t>(bins.bins(f)));
    }

    Tree grow(std::span<const Eigen::Index> rows) {
        Tree tree;
        LeafState root;
        root.rows.assign(rows.begin(), rows.end());
        root.hist = histogram(root.rows);
        for (auto r : root.rows) {
            root.grad += grad_(r);
            root.hess += hess_(r);
        }
        root.best = best_split(root);
        tree.nodes.push_back(leaf_node(root.grad, root.hess));

        std::vector<LeafState> leaves;
        leaves.push_back(std::move(root));
        while (static_cast<int>(leaves.size()) < config_.max_leaves) {
            std::ptrdiff_t pick = -1;
            for (std::size_t k = 0; k < leaves.size(); ++k) {
                if (leaves[k].best.feature < 0) continue;
                if (pick < 0 || leaves[k].best.gain > leaves[static_cast<std::size_t>(pick)].best.gain) {
                    pick = static_cast<std::ptrdiff_t>(k);
                }
            }
            if (pick < 0) break;
            LeafState parent = std::move(leaves[static_cast<std::size_t>(pick)]);
            leaves.erase(leaves.begin() + pick);
            auto [left, right] = split(parent, tree);
            leaves.push_back(std::move(left));
            leaves.push_back(std::move(right));
        }
        return tree;
    }

private:
    TreeNode leaf_node(double grad, double hess) const {
        TreeNode node;
        node.value = -config_.learning_rate * grad / (hess + config_.lambda);
        return node;
    }

    std::vector<Bucket> histogram(const std::vector<Eigen::Index>& rows) const {
        std::vector<Bucket> hist(offsets_.back());
        for (Eigen::Index f = 0; f < bins_.features(); ++f) {
            const std::uint8_t* column = binned_.data() + f * total_rows_;
            Bucket* base = hist.data() + offsets_[static_cast<std::size_t>(f)];
            for (auto r : rows) {
                Bucket& b = base[column[r]];
                b.grad += grad_(r);
                b.hess += hess_(r);
                ++b.count;
            }
        }
        return hist;
    }

    SplitChoice best_split(const LeafState& leaf) const {
        SplitChoice best;
        best.gain = config_.min_split_gain;
        if (config_.max_depth >= 0 && leaf.depth >= config_.max_depth) return best;
        const auto n = static_cast<Eigen::Index>(leaf.rows.size());
        if (n < 2 * static_cast<Eigen::Index>(config_.min_data_in_leaf)) return best;
        for (Eigen::Index f = 0; f < bins_.features(); ++f) {
            const Bucket* base = leaf.hist.data() + offsets_[static_cast<std::size_t>(f)];
            double gl = 0.0, hl = 0.0;
            Eigen::Index nl = 0;
            for (int b = 0; b + 1 < bins_.bins(f); ++b) {
                gl += base[b].grad;
                hl += base[b].hess;
                nl += base[b].count;
                if (nl < config_.min_data_in_leaf) continue;
                if (n - nl < config_.min_data_in_leaf) break;
                const double gain = split_gain(gl, hl, leaf.grad - gl, leaf.hess - hl, config_.lambda);
                if (gain > best.gain) {
                    best = {gain, static_cast<int>(f), b, gl, hl, nl};
                }
            }
        }
        return best;
    }

    std::pair<LeafState, LeafState> split(LeafState& parent, Tree& tree) const {
        const auto& choice = parent.best;
        const std::uint8_t* column = binned_.data() + static_cast<Eigen::Index>(choice.feature) * total_rows_;
        LeafState left, right;
        for (auto r : parent.rows) {
            (column[r] <= choice.bin ? left.rows : right.rows).push_back(r);
        }
        left.depth = right.depth = parent.depth + 1;
        left.grad = choice.grad_left;
        left.hess = choice.hess_left;
        right.grad = parent.grad - choice.grad_left;
        right.hess = parent.hess - choice.hess_left;

        // build the smaller child directly, derive the other by subtraction
        LeafState& small = left.rows.size() <= right.rows.size() ? left : right;
        LeafState& large = &small == &left ? right : left;
        small.hist = histogram(small.rows);
        large.hist = std::move(parent.hist);
        for (std::size_t k = 0; k < large.hist.size(); ++k) {
            large.hist[k].grad -= small.hist[k].grad;
            large.hist[k].hess -= small.hist[k].hess;
            large.hist[k].count -= small.hist[k].count;
        }

        auto& node = tree.nodes[static_cast<std::size_t>(parent.node)];
        node.feature = choice.feature;
        node.bin = choice.bin;
        node.threshold = bins_.edges(choice.feature)[static_cast<std::size_t>(choice.bin)];
        node.gain = choice.gain;
        node.value = 0.0;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        left.node = node.left;
        right.node = node.right;
        tree.nodes.push_back(leaf_node(left.grad, left.hess));
        tree.nodes.push_back(leaf_node(right.grad, right.hess));

        left.best = best_split(left);
        right.best = best_split(right);
        return {std::move(left), std::move(right)};
    }

    const BinMapper& bins_;
    std::span<const std::uint8_t> binned_;
    Eigen::Index total_rows_;
    const Eigen::VectorXd& grad_;
    const Eigen::VectorXd& hess_;
    const BoosterConfig& config_;
    std::vector<std::size_t> offsets_;
};

double predict_binned(const Tree& tree, const std::uint8_t* binned, Eigen::Index total_rows, Eigen::Index row) {
    int k = 0;
    while (!tree.nodes[static_cast<std::size_t>(k)].is_leaf()) {
        const auto& node = tree.nodes[static_cast<std::size_t>(k)];
        k = binned[node.feature * total_rows + row] <= node.bin ? node.left : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(k)].value;
}

double mean_log_loss(const Eigen::VectorXi& labels, const Eigen::VectorXd& margins) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double p = std::clamp(sigmoid(margins(i)), kProbabilityClip, 1.0 - kProbabilityClip);
        total -= labels(i) == 1 ? std::log(p) : std::log1p(-p);
    }
    return margins.size() > 0 ? total / static_cast<double>(margins.size()) : 0.0;
}

}  // namespace

Tree grow_tree(const BinMapper& bins, std::span<const std::uint8_t> binned, Eigen::Index total_rows,
               std::span<const Eigen::Index> rows, const Eigen::VectorXd& grad, const Eigen::VectorXd& hess,
               const BoosterConfig& config) {
    return TreeGrower(bins, binned, total_rows, grad, hess, config).grow(rows);
}

// ---------------------------------------------------------------------------
// Booster

Booster::Booster(BoosterConfig config) : config_(config) { config_.validate(); }

FitReport Booster::fit(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds, const Holdout* holdout) {
    config_.validate();
    if (features.rows() != labels.size()) throw ShapeError("booster fit: features and labels differ in rows");
    if (features.rows() == 0) throw DataError("booster fit: empty training set");
    bins_ = BinMapper::fit(features, config_.max_bin);
    trees_.clear();
    rounds_completed_ = 0;
    trees_skipped_ = 0;
    const double rate = std::clamp(labels.cast<double>().mean(), 1e-6, 1.0 - 1e-6);
    base_score_ = logit(rate);
    fitted_ = true;
    return boost(features, labels, rounds, holdout);
}

FitReport Booster::warm_start(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds,
                              const Holdout* holdout) {
    if (!fitted_) throw TrainingError("warm start requires a fitted booster");
    if (features.cols() != bins_.features()) {
        throw ConfigError("warm start schema mismatch: model has " + std::to_string(bins_.features()) +
                          " features, batch has " + std::to_string(features.cols()));
    }
    if (features.rows() != labels.size()) throw ShapeError("warm start: features and labels differ in rows");
    return boost(features, labels, rounds, holdout);
}

FitReport Booster::boost(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds, const Holdout* holdout) {
    FitReport report;
    report.rounds_requested = rounds;
    if (rounds <= 0) return report;

    const Eigen::Index n = features.rows();
    const auto binned = bins_.transform(features);
    Eigen::VectorXd margins = predict_margin(features);
    Eigen::VectorXd holdout_margins;
    if (holdout) holdout_margins = predict_margin(holdout->features);

    std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), Eigen::Index{0});

    const std::size_t trees_before = trees_.size();
    const int rounds_before = rounds_completed_;
    const int skipped_before = trees_skipped_;
    std::vector<std::size_t> trees_after_round;
    std::vector<int> skipped_after_round;
    // rounds that never beat the incoming forest on the holdout are discarded
    double best_loss = holdout ? mean_log_loss(holdout->labels, holdout_margins) : INFINITY;
    int since_best = 0;

    Eigen::VectorXd grad(n), hess(n);
    for (int round = 0; round < rounds; ++round) {
        const auto gh = logloss_grad_hess(labels, margins);
        std::vector<Eigen::Index> rows;
        if (config_.variant == BoosterVariant::Goss) {
            const auto sample = goss_sample(gh.grad, config_.goss_top_rate, config_.goss_other_rate,
                                            mix64(config_.seed, static_cast<std::uint64_t>(rounds_completed_)));
            rows = sample.rows;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto r = rows[k];
                grad(r) = gh.grad(r) * sample.weights(static_cast<Eigen::Index>(k));
                hess(r) = gh.hess(r) * sample.weights(static_cast<Eigen::Index>(k));
            }
        } else {
            rows = all_rows;
            grad = gh.grad;
            hess = gh.hess;
        }
        Tree tree = grow_tree(bins_, binned, n, rows, grad, hess, config_);
        ++rounds_completed_;
        if (tree.nodes.size() == 1) {
            ++trees_skipped_;
            ++report.trees_skipped;
        } else {
            for (Eigen::Index i = 0; i < n; ++i) margins(i) += predict_binned(tree, binned.data(), n, i);
            if (holdout) {
                for (Eigen::Index i = 0; i < holdout->features.rows(); ++i) {
                    holdout_margins(i) += tree.predict(holdout->features.row(i));
                }
            }
            trees_.push_back(std::move(tree));
            ++report.trees_added;
        }
        trees_after_round.push_back(trees_.size());
        skipped_after_round.push_back(trees_skipped_);
        report.train_loss.push_back(mean_log_loss(labels, margins));
        if (holdout) {
            const double loss = mean_log_loss(holdout->labels, holdout_margins);
            report.holdout_loss.push_back(loss);
            if (loss < best_loss) {
                best_loss = loss;
                report.best_iteration = round;
                since_best = 0;
            } else if (++since_best >= config_.early_stopping_rounds && config_.early_stopping_rounds > 0) {
                break;
            }
        }
    }
    if (holdout) {
        const int best = report.best_iteration;
        trees_.resize(best >= 0 ? trees_after_round[static_cast<std::size_t>(best)] : trees_before);
        rounds_completed_ = rounds_before + best + 1;
        trees_skipped_ = best >= 0 ? skipped_after_round[static_cast<std::size_t>(best)] : skipped_before;
        report.trees_added = static_cast<int>(trees_.size() - trees_before);
        report.trees_skipped = trees_skipped_ - skipped_before;
    }
    return report;
}

Eigen::VectorXd Booster::predict_margin(const Eigen::MatrixXd& features) const {
    if (fitted_ && features.cols() != bins_.features()) throw ShapeError("booster predict: feature count mismatch");
    Eigen::VectorXd margins = Eigen::VectorXd::Constant(features.rows(), base_score_);
    for (const auto& tree : trees_) {
        for (Eigen::Index i = 0; i < features.rows(); ++i) margins(i) += tree.predict(features.row(i));
    }
    return margins;
}

Eigen::VectorXd Booster::predict_proba(const Eigen::MatrixXd& features) const {
    return predict_margin(features).unaryExpr([](double m) { return sigmoid(m); });
}

Eigen::VectorXd Booster::feature_importance() const {
    Eigen::VectorXd importance = Eigen::VectorXd::Zero(bins_.features());
    for (const auto& tree : trees_) {
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) importance(node.feature) += node.gain;
        }
    }
    return importance;
}

// ---------------------------------------------------------------------------
// Serialization
//
//   hydra-booster 1
//   <key> <value>                 (configuration and state, fixed order)
//   edges <feature> <count> <e_1> ... <e_count>
//   trees <count>
//   node <tree> <node> <feature> <threshold> <bin> <left> <right> <value> <gain>

std::string Booster::serialize() const {
    std::ostringstream out;
    out << "hydra-booster 1\n";
    out << "variant " << to_string(config_.variant) << '\n';
    out << "learning_rate " << format_double(config_.learning_rate) << '\n';
    out << "lambda " << format_double(config_.lambda) << '\n';
    out << "max_bin " << config_.max_bin << '\n';
    out << "max_leaves " << config_.max_leaves << '\n';
    out << "max_depth " << config_.max_depth << '\n';
    out << "min_data_in_leaf " << config_.min_data_in_leaf << '\n';
    out << "min_split_gain " << format_double(config_.min_split_gain) << '\n';
    out << "goss_top_rate " << format_double(config_.goss_top_rate) << '\n';
    out << "goss_other_rate " << format_double(config_.goss_other_rate) << '\n';
    out << "early_stopping_rounds " << config_.early_stopping_rounds << '\n';
    out << "seed " << config_.seed << '\n';
    out << "fitted " << (fitted_ ? 1 : 0) << '\n';
    out << "base_score " << format_double(base_score_) << '\n';
    out << "rounds_completed " << rounds_completed_ << '\n';
    out << "trees_skipped " << trees_skipped_ << '\n';
    out << "features " << bins_.features() << '\n';
    for (Eigen::Index f = 0; f < bins_.features(); ++f) {
        const auto& e = bins_.edges(f);
        out << "edges " << f << ' ' << e.size();
        for (double v : e) out << ' ' << format_double(v);
        out << '\n';
    }
    out << "trees " << trees_.size() << '\n';
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        for (std::size_t k = 0; k < trees_[t].nodes.size(); ++k) {
            const auto& n = trees_[t].nodes[k];
            out << "node " << t << ' ' << k << ' ' << n.feature << ' ' << format_double(n.threshold) << ' ' << n.bin
                << ' ' << n.left << ' ' << n.right << ' ' << format_double(n.value) << ' ' << format_double(n.gain)
                << '\n';
        }
    }
    return out.str();
}

namespace {

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    std::vector<std::string> next(std::string_view expected_key) {
        std::string line;
        if (!std::getline(in_, line)) throw DataError("model file truncated before \"" + std::string(expected_key) + "\"");
        std::istringstream fields(line);
        std::vector<std::string> tokens;
        for (std::string tok; fields >> tok;) tokens.push_back(tok);
        if (tokens.empty() || tokens[0] != expected_key) {
            throw DataError("model file: expected \"" + std::string(expected_key) + "\", got \"" + line + "\"");
        }
        return tokens;
    }

    std::string value(std::string_view key) {
        auto tokens = next(key);
        if (tokens.size() != 2) throw DataError("model file: malformed \"" + std::string(key) + "\" line");
        return tokens[1];
    }

private:
    std::istringstream in_;
};

}  // namespace

Booster Booster::deserialize(const std::string& text) {
    LineReader reader(text);
    if (reader.value("hydra-booster") != "1") throw DataError("unsupported booster format version");
    BoosterConfig config;
    config.variant = parse_booster_variant(reader.value("variant"));
    config.learning_rate = parse_double(reader.value("learning_rate"));
    config.lambda = parse_double(reader.value("lambda"));
    config.max_bin = parse_int<int>(reader.value("max_bin"));
    config.max_leaves = parse_int<int>(reader.value("max_leaves"));
    config.max_depth = parse_int<int>(reader.value("max_depth"));
    config.min_data_in_leaf = parse_int<int>(reader.value("min_data_in_leaf"));
    config.min_split_gain = parse_double(reader.value("min_split_gain"));
    config.goss_top_rate = parse_double(reader.value("goss_top_rate"));
    config.goss_other_rate = parse_double(reader.value("goss_other_rate"));
    config.early_stopping_rounds = parse_int<int>(reader.value("early_stopping_rounds"));
    config.seed = parse_int<std::uint64_t>(reader.value("seed"));

    Booster booster(config);
    booster.fitted_ = parse_int<int>(reader.value("fitted")) == 1;
    booster.base_score_ = parse_double(reader.value("base_score"));
    booster.rounds_completed_ = parse_int<int>(reader.value("rounds_completed"));
    booster.trees_skipped_ = parse_int<int>(reader.value("trees_skipped"));
    const auto n_features = parse_int<Eigen::Index>(reader.value("features"));
    std::vector<std::vector<double>> edges(static_cast<std::size_t>(n_features));
    for (Eigen::Index f = 0; f < n_features; ++f) {
        auto tokens = reader.next("edges");
        if (tokens.size() < 3 || parse_int<Eigen::Index>(tokens[1]) != f) throw DataError("model file: bad edges line");
        const auto count = parse_int<std::size_t>(tokens[2]);
        if (tokens.size() != count + 3) throw DataError("model file: edge count mismatch");
        for (std::size_t k = 0; k < count; ++k) edges[static_cast<std::size_t>(f)].push_back(parse_double(tokens[k + 3]));
    }
    booster.bins_ = BinMapper::from_edges(std::move(edges));
    const auto n_trees = parse_int<std::size_t>(reader.value("trees"));
    booster.trees_.resize(n_trees);
    // nodes arrive grouped by tree; the count per tree is implicit
    std::istringstream rest(text.substr(text.find("\ntrees ") + 1));
    std::string line;
    std::getline(rest, line);
    while (std::getline(rest, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::vector<std::string> t;
        for (std::string tok; fields >> tok;) t.push_back(tok);
        if (t.size() != 10 || t[0] != "node") throw DataError("model file: bad node line \"" + line + "\"");
        const auto tree = parse_int<std::size_t>(t[1]);
        const auto index = parse_int<std::size_t>(t[2]);
        if (tree >= n_trees || index != booster.trees_[tree].nodes.size()) throw DataError("model file: nodes out of order");
        TreeNode node;
        node.feature = parse_int<int>(t[3]);
        node.threshold = parse_double(t[4]);
        node.bin = parse_int<int>(t[5]);
        node.left = parse_int<int>(t[6]);
        node.right = parse_int<int>(t[7]);
        node.value = parse_double(t[8]);
        node.gain = parse_double(t[9]);
        booster.trees_[tree].nodes.push_back(node);
    }
    return booster;
}

// ---------------------------------------------------------------------------
// Ordered target statistics

Eigen::VectorXd ordered_target_statistics(std::span<const std::int32_t> codes, std::span<const int> labels,
                                          std::uint64_t permutation_seed, double prior, double smoothing) {
    if (codes.size() != labels.size()) throw ShapeError("ordered target statistics: codes and labels differ in length");
    Rng rng(permutation_seed);
    const auto order = rng.permutation(codes.size());
    std::int32_t max_code = -1;
    for (auto c : codes) max_code = std::max(max_code, c);
    std::vector<double> sums(static_cast<std::size_t>(max_code + 2), 0.0), counts(sums.size(), 0.0);
    Eigen::VectorXd out(static_cast<Eigen::Index>(codes.size()));
    for (auto i : order) {
        // missing codes share one extra slot
        const auto slot = codes[i] < 0 ? static_cast<std::size_t>(max_code + 1) : static_cast<std::size_t>(codes[i]);
        out(static_cast<Eigen::Index>(i)) = (sums[slot] + smoothing * prior) / (counts[slot] + smoothing);
        sums[slot] += labels[i];
        counts[slot] += 1.0;
    }
    return out;
}

}  // namespace hydra
