#include "hydra/autocross.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "hydra/format.hpp"
#include "hydra/random.hpp"

namespace hydra {

std::string_view to_string(CrossOperator op) {
    switch (op) {
        case CrossOperator::Product: return "product";
        case CrossOperator::SafeRatio: return "safe_ratio";
        case CrossOperator::Sum: return "sum";
        case CrossOperator::Difference: return "difference";
    }
    return "product";
}

CrossOperator parse_cross_operator(std::string_view text) {
    for (auto op : kCrossOperators) {
        if (to_string(op) == text) return op;
    }
    throw ConfigError("unknown cross operator \"" + std::string(text) + "\"");
}

Eigen::Index FeaturePool::find(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("feature pool has no column \"" + name + "\"");
    return static_cast<Eigen::Index>(it - names.begin());
}

void FeaturePool::append(std::string name, const Eigen::VectorXd& column, int column_order) {
    if (column.size() != values.rows()) throw ShapeError("feature pool: appended column has the wrong length");
    values.conservativeResize(Eigen::NoChange, values.cols() + 1);
    values.col(values.cols() - 1) = column;
    names.push_back(std::move(name));
    order.push_back(column_order);
}

FeaturePool make_pool(std::vector<std::string> names, Eigen::MatrixXd values) {
    if (static_cast<Eigen::Index>(names.size()) != values.cols()) throw ShapeError("feature pool: names and columns differ");
    FeaturePool pool;
    pool.order.assign(names.size(), 1);
    pool.names = std::move(names);
    pool.values = std::move(values);
    return pool;
}

std::string CrossCandidate::name() const {
    return std::string(to_string(op)) + "(" + left + "," + right + ")";
}

void AutoCrossConfig::validate() const {
    if (min_support < 1) throw ConfigError("autocross.min_support must be positive");
    if (max_order < 2) throw ConfigError("autocross.max_order must be at least 2");
    if (beam_width < 1) throw ConfigError("autocross.beam_width must be positive");
    if (generations < 0) throw ConfigError("autocross.generations must be non-negative");
    if (probe_trees < 1 || probe_depth < 1) throw ConfigError("autocross probe model needs trees and depth");
    if (probe_seeds < 2) throw ConfigError("autocross.probe_seeds must be at least 2 to estimate a margin");
    if (!(margin_sigmas >= 0.0)) throw ConfigError("autocross.margin_sigmas must be non-negative");
    if (null_probes < 0) throw ConfigError("autocross.null_probes must be non-negative");
    if (!(prune_floor >= 0.0 && prune_floor < 1.0)) throw ConfigError("autocross.prune_floor must lie in [0, 1)");
}

BoosterConfig AutoCrossConfig::probe_config(std::uint64_t probe_seed) const {
    BoosterConfig c;
    c.variant = BoosterVariant::Goss;
    c.max_depth = probe_depth;
    c.max_leaves = 1 << std::min(probe_depth, 10);
    c.seed = probe_seed;
    return c;
}

double candidate_priority(const Eigen::Ref<const Eigen::VectorXd>& values,
                          const Eigen::Ref<const Eigen::VectorXd>& residual) {
    double n = 0.0, sx = 0.0, sy = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values(i))) continue;
        n += 1.0;
        sx += values(i);
        sy += residual(i);
    }
    if (n < 2.0) return 0.0;
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values(i))) continue;
        const double dx = values(i) - mx, dy = residual(i) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return std::abs(sxy) / std::sqrt(sxx * syy);
}

Eigen::VectorXd candidate_values(const FeaturePool& pool, const CrossCandidate& candidate) {
    return apply_cross(candidate.op, pool.values.col(pool.find(candidate.left)).eval(),
                       pool.values.col(pool.find(candidate.right)).eval());
}

namespace {

Eigen::Index support_of(const Eigen::VectorXd& values) {
    Eigen::Index s = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) s += std::isfinite(values(i)) ? 1 : 0;
    return s;
}

bool is_constant(const Eigen::VectorXd& values) {
    double first = NAN;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values(i))) continue;
        if (std::isnan(first)) {
            first = values(i);
        } else if (values(i) != first) {
            return false;
        }
    }
    return true;
}

Eigen::MatrixXd with_column(const Eigen::MatrixXd& base, const Eigen::VectorXd& column) {
    Eigen::MatrixXd out(base.rows(), base.cols() + 1);
    out.leftCols(base.cols()) = base;
    out.col(base.cols()) = column;
    return out;
}

double probe_loss(const Eigen::MatrixXd& train, const Eigen::VectorXi& train_labels, const Eigen::MatrixXd& holdout,
                  const Eigen::VectorXi& holdout_labels, const AutoCrossConfig& config, int seed_index,
                  Eigen::VectorXd* train_proba = nullptr) {
    Booster booster(config.probe_config(mix64(config.seed, static_cast<std::uint64_t>(seed_index))));
    booster.fit(train, train_labels, config.probe_trees);
    if (train_proba) *train_proba = booster.predict_proba(train);
    return log_loss(holdout_labels, booster.predict_proba(holdout));
}

}  // namespace

std::vector<CrossCandidate> propose(const FeaturePool& pool, std::span<const CrossCandidate> previous_accepted,
                                    int generation, const Eigen::VectorXd& residual, const AutoCrossConfig& config) {
    if (pool.names.empty()) throw DataError("autocross: empty feature pool");
    if (residual.size() != pool.values.rows()) throw ShapeError("autocross: residual length differs from pool rows");
    std::vector<CrossCandidate> raw;
    std::vector<Eigen::Index> base;
    for (std::size_t k = 0; k < pool.names.size(); ++k) {
        if (pool.order[k] == 1) base.push_back(static_cast<Eigen::Index>(k));
    }
    if (generation == 0) {
        for (std::size_t a = 0; a < base.size(); ++a) {
            for (std::size_t b = a + 1; b < base.size(); ++b) {
                for (auto op : kCrossOperators) {
                    CrossCandidate c;
                    c.left = pool.names[static_cast<std::size_t>(base[a])];
                    c.right = pool.names[static_cast<std::size_t>(base[b])];
                    c.op = op;
                    c.order = 2;
                    c.ancestors = {c.left, c.right};
                    std::sort(c.ancestors.begin(), c.ancestors.end());
                    raw.push_back(std::move(c));
                }
            }
        }
    } else {
        for (const auto& parent : previous_accepted) {
            if (parent.order + 1 > config.max_order) continue;
            for (auto b : base) {
                const auto& name = pool.names[static_cast<std::size_t>(b)];
                if (std::binary_search(parent.ancestors.begin(), parent.ancestors.end(), name)) continue;
                for (auto op : kCrossOperators) {
                    CrossCandidate c;
                    c.left = parent.name();
                    c.right = name;
                    c.op = op;
                    c.order = parent.order + 1;
                    c.ancestors = parent.ancestors;
                    c.ancestors.push_back(name);
                    std::sort(c.ancestors.begin(), c.ancestors.end());
                    raw.push_back(std::move(c));
                }
            }
        }
    }

    std::set<std::string> existing(pool.names.begin(), pool.names.end());
    std::vector<CrossCandidate> kept;
    for (auto& c : raw) {
        c.generation = generation;
        if (existing.count(c.name())) continue;
        const Eigen::VectorXd values = candidate_values(pool, c);
        c.support = support_of(values);
        if (c.support < config.min_support) continue;
        c.priority = candidate_priority(values, residual);
        kept.push_back(std::move(c));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.priority > b.priority; });
    if (kept.size() > static_cast<std::size_t>(config.beam_width)) kept.resize(static_cast<std::size_t>(config.beam_width));
    return kept;
}

ProbeBaseline probe_baseline(const Eigen::MatrixXd& train, const Eigen::VectorXi& train_labels,
                             const Eigen::MatrixXd& holdout, const Eigen::VectorXi& holdout_labels,
                             const AutoCrossConfig& config) {
    ProbeBaseline b;
    Eigen::VectorXd proba;
    for (int s = 0; s < config.probe_seeds; ++s) {
        b.losses.push_back(probe_loss(train, train_labels, holdout, holdout_labels, config, s, s == 0 ? &proba : nullptr));
    }
    const double n = static_cast<double>(b.losses.size());
    b.mean = std::accumulate(b.losses.begin(), b.losses.end(), 0.0) / n;
    double var = 0.0;
    for (double l : b.losses) var += (l - b.mean) * (l - b.mean);
    b.margin = config.margin_sigmas * std::sqrt(var / n);
    b.residual = train_labels.cast<double>() - proba;
    return b;
}

double evaluate_candidate(const ProbeBaseline& baseline, const Eigen::MatrixXd& train, const Eigen::VectorXi& train_labels,
                          const Eigen::VectorXd& train_column, const Eigen::MatrixXd& holdout,
                          const Eigen::VectorXi& holdout_labels, const Eigen::VectorXd& holdout_column,
                          const AutoCrossConfig& config) {
    const Eigen::MatrixXd train_plus = with_column(train, train_column);
    const Eigen::MatrixXd holdout_plus = with_column(holdout, holdout_column);
    double total = 0.0;
    for (int s = 0; s < config.probe_seeds; ++s) {
        total += baseline.losses[static_cast<std::size_t>(s)] -
                 probe_loss(train_plus, train_labels, holdout_plus, holdout_labels, config, s);
    }
    return total / config.probe_seeds;
}

double null_delta_bound(const ProbeBaseline& baseline, const FeaturePool& train, const Eigen::VectorXi& train_labels,
                        const FeaturePool& holdout, const Eigen::VectorXi& holdout_labels,
                        std::span<const CrossCandidate> candidates, int generation, const AutoCrossConfig& config) {
    if (candidates.empty() || config.null_probes == 0) return 0.0;
    Rng rng(mix64(config.seed, static_cast<std::uint64_t>(generation), 0x6e756c6cULL));
    std::vector<double> deltas;
    for (int k = 0; k < config.null_probes; ++k) {
        const auto& c = candidates[static_cast<std::size_t>(k) % candidates.size()];
        Eigen::VectorXd tr = candidate_values(train, c);
        Eigen::VectorXd ho = candidate_values(holdout, c);
        rng.shuffle(std::span<double>(tr.data(), static_cast<std::size_t>(tr.size())));
        rng.shuffle(std::span<double>(ho.data(), static_cast<std::size_t>(ho.size())));
        deltas.push_back(evaluate_candidate(baseline, train.values, train_labels, tr, holdout.values, holdout_labels, ho, config));
    }
    const double n = static_cast<double>(deltas.size());
    const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
    double var = 0.0;
    for (double d : deltas) var += (d - mean) * (d - mean);
    return mean + config.margin_sigmas * std::sqrt(var / n);
}

CrossLedger run_autocross(const FeaturePool& train, const Eigen::VectorXi& train_labels, const FeaturePool& holdout,
                          const Eigen::VectorXi& holdout_labels, const AutoCrossConfig& config) {
    config.validate();
    if (train.names != holdout.names) throw ShapeError("autocross: train and holdout pools differ in columns");
    FeaturePool pool_train = train, pool_holdout = holdout;
    CrossLedger ledger;
    std::vector<CrossCandidate> previous;
    for (int g = 0; g < config.generations; ++g) {
        if (g > 0 && previous.empty()) break;
        const auto baseline =
            probe_baseline(pool_train.values, train_labels, pool_holdout.values, holdout_labels, config);
        if (g == 0) ledger.base_loss = baseline.mean;
        const auto candidates = propose(pool_train, previous, g, baseline.residual, config);
        const double margin = std::max(baseline.margin, null_delta_bound(baseline, pool_train, train_labels, pool_holdout,
                                                                         holdout_labels, candidates, g, config));
        std::vector<CrossLedgerEntry> accepted;
        for (const auto& c : candidates) {
            const Eigen::VectorXd tr = candidate_values(pool_train, c);
            const Eigen::VectorXd ho = candidate_values(pool_holdout, c);
            CrossLedgerEntry entry;
            entry.candidate = c;
            entry.margin = margin;
            entry.degenerate = is_constant(tr);
            entry.delta_loss =
                evaluate_candidate(baseline, pool_train.values, train_labels, tr, pool_holdout.values, holdout_labels, ho, config);
            if (!entry.degenerate && entry.delta_loss > entry.margin) {
                accepted.push_back(std::move(entry));
            } else {
                ++ledger.rejected;
            }
        }
        previous.clear();
        for (auto& entry : accepted) {
            pool_train.append(entry.candidate.name(), candidate_values(pool_train, entry.candidate), entry.candidate.order);
            pool_holdout.append(entry.candidate.name(), candidate_values(pool_holdout, entry.candidate), entry.candidate.order);
            previous.push_back(entry.candidate);
            ledger.accepted.push_back(std::move(entry));
        }
    }
    return ledger;
}

CrossLedger prune(CrossLedger ledger, std::span<const double> gains, double floor) {
    if (gains.size() != ledger.accepted.size()) throw ShapeError("prune: one gain per accepted cross required");
    const double total = std::accumulate(gains.begin(), gains.end(), 0.0);
    for (std::size_t k = 0; k < gains.size(); ++k) {
        auto& entry = ledger.accepted[k];
        entry.gain_share = total > 0.0 ? gains[k] / total : 0.0;
        entry.pruned = gains[k] <= 0.0 || entry.gain_share < floor;
    }
    return ledger;
}

std::vector<double> cross_importance(const CrossLedger& ledger, const FeaturePool& train,
                                     const Eigen::VectorXi& train_labels, const AutoCrossConfig& config) {
    if (ledger.accepted.empty()) return {};
    FeaturePool full = train;
    for (const auto& entry : ledger.accepted) {
        full.append(entry.candidate.name(), candidate_values(full, entry.candidate), entry.candidate.order);
    }
    Booster booster(config.probe_config(config.seed));
    booster.fit(full.values, train_labels, config.probe_trees);
    const Eigen::VectorXd importance = booster.feature_importance();
    std::vector<double> gains;
    for (std::size_t k = 0; k < ledger.accepted.size(); ++k) {
        gains.push_back(importance(train.values.cols() + static_cast<Eigen::Index>(k)));
    }
    return gains;
}

FeaturePool apply_ledger(const CrossLedger& ledger, FeaturePool pool) {
    FeaturePool full = pool;
    for (const auto& entry : ledger.accepted) {
        full.append(entry.candidate.name(), candidate_values(full, entry.candidate), entry.candidate.order);
    }
    const Eigen::Index base_cols = pool.values.cols();
    for (std::size_t k = 0; k < ledger.accepted.size(); ++k) {
        const auto& entry = ledger.accepted[k];
        if (entry.pruned) continue;
        pool.append(entry.candidate.name(), full.values.col(base_cols + static_cast<Eigen::Index>(k)), entry.candidate.order);
    }
    return pool;
}

std::vector<std::string> CrossLedger::surviving_names() const {
    std::vector<std::string> names;
    for (const auto& e : accepted) {
        if (!e.pruned) names.push_back(e.candidate.name());
    }
    return names;
}

std::string CrossLedger::to_text() const {
    std::ostringstream out;
    out << "base_loss " << format_double(base_loss) << '\n';
    out << "rejected " << rejected << '\n';
    out << "accepted " << accepted.size() << '\n';
    out << "name,left,right,operator,support,generation,delta_loss,margin,gain_share,pruned\n";
    for (const auto& e : accepted) {
        const auto& c = e.candidate;
        out << c.name() << ',' << c.left << ',' << c.right << ',' << to_string(c.op) << ',' << c.support << ','
            << c.generation << ',' << format_double(e.delta_loss) << ',' << format_double(e.margin) << ','
            << format_double(e.gain_share) << ',' << (e.pruned ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace hydra
