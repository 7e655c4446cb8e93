#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hydra/gbdt.hpp"

namespace hydra {

enum class CrossOperator { Product, SafeRatio, Sum, Difference };

inline constexpr CrossOperator kCrossOperators[] = {CrossOperator::Product, CrossOperator::SafeRatio,
                                                    CrossOperator::Sum, CrossOperator::Difference};
inline constexpr double kRatioFloor = 1e-12;

std::string_view to_string(CrossOperator op);
CrossOperator parse_cross_operator(std::string_view text);

/// f_k(u, v) elementwise; NaN wherever either input is NaN. safe_ratio clamps
/// |v| below kRatioFloor to kRatioFloor with the sign of v (zero counts as +).
template <typename Scalar>
Scalar cross_value(CrossOperator op, Scalar u, Scalar v) {
    switch (op) {
        case CrossOperator::Product: return u * v;
        case CrossOperator::SafeRatio: {
            const Scalar floor(kRatioFloor);
            const Scalar d = std::abs(v) < floor ? (std::signbit(v) ? -floor : floor) : v;
            return u / d;
        }
        case CrossOperator::Sum: return u + v;
        case CrossOperator::Difference: return u - v;
    }
    return Scalar(0);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_cross(CrossOperator op,
                                                                      const Eigen::MatrixBase<Derived>& u,
                                                                      const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    return u.binaryExpr(v, [op](Scalar a, Scalar b) { return cross_value(op, a, b); });
}

/// Named numeric columns. `order` is 1 for base features and the number of
/// base features involved for crosses.
struct FeaturePool {
    std::vector<std::string> names;
    Eigen::MatrixXd values;
    std::vector<int> order;

    Eigen::Index find(const std::string& name) const;
    void append(std::string name, const Eigen::VectorXd& column, int column_order);
};

FeaturePool make_pool(std::vector<std::string> names, Eigen::MatrixXd values);

struct CrossCandidate {
    std::string left;
    std::string right;
    CrossOperator op = CrossOperator::Product;
    Eigen::Index support = 0;  // rows where both parents are finite
    int generation = 0;
    int order = 2;
    double priority = 0.0;
    std::vector<std::string> ancestors;  // base features, sorted

    std::string name() const;
};

struct AutoCrossConfig {
    int min_support = 50;
    int max_order = 3;
    int beam_width = 20;
    int generations = 3;
    int probe_trees = 50;
    int probe_depth = 4;
    int probe_seeds = 5;
    double margin_sigmas = 2.0;
    // The margin is the larger of margin_sigmas x the probe-seed std of
    // L_base and the null bound over null_probes row-shuffled copies of the
    // beam; 0 disables the shuffled copies.
    int null_probes = 20;
    double prune_floor = 0.01;  // share of total cross gain
    std::uint64_t seed = 0;

    void validate() const;
    BoosterConfig probe_config(std::uint64_t probe_seed) const;
};

/// |Pearson correlation| between a candidate and the residual over rows
/// where the candidate is finite; 0 for constant candidates.
double candidate_priority(const Eigen::Ref<const Eigen::VectorXd>& values,
                          const Eigen::Ref<const Eigen::VectorXd>& residual);

/// Generation 0 pairs every two base features under every operator;
/// generation g >= 1 pairs each cross accepted in generation g - 1 with every
/// base feature that is not already one of its ancestors, up to max_order.
/// Candidates under min_support are dropped, the rest are ranked by
/// descending priority (ties keep enumeration order) and truncated to the
/// beam width.
std::vector<CrossCandidate> propose(const FeaturePool& pool, std::span<const CrossCandidate> previous_accepted,
                                    int generation, const Eigen::VectorXd& residual, const AutoCrossConfig& config);

Eigen::VectorXd candidate_values(const FeaturePool& pool, const CrossCandidate& candidate);

struct ProbeBaseline {
    std::vector<double> losses;  // holdout loss per probe seed
    double mean = 0.0;
    double margin = 0.0;  // margin_sigmas * population std of losses
    Eigen::VectorXd residual;  // y - p on train from the first probe seed
};

ProbeBaseline probe_baseline(const Eigen::MatrixXd& train, const Eigen::VectorXi& train_labels,
                             const Eigen::MatrixXd& holdout, const Eigen::VectorXi& holdout_labels,
                             const AutoCrossConfig& config);

/// Mean over probe seeds of L_base - L_base+feat on the holdout.
double evaluate_candidate(const ProbeBaseline& baseline, const Eigen::MatrixXd& train, const Eigen::VectorXi& train_labels,
                          const Eigen::VectorXd& train_column, const Eigen::MatrixXd& holdout,
                          const Eigen::VectorXi& holdout_labels, const Eigen::VectorXd& holdout_column,
                          const AutoCrossConfig& config);

/// Upper null bound mean + margin_sigmas * std of evaluate_candidate over
/// row-shuffled copies of the first `null_probes` candidates (cycling when
/// the beam is shorter). Shuffling keeps each column's marginal and breaks
/// any link to the labels, so this is how far an uninformative extra column
/// moves the holdout loss. Returns 0 when there is nothing to shuffle.
double null_delta_bound(const ProbeBaseline& baseline, const FeaturePool& train, const Eigen::VectorXi& train_labels,
                        const FeaturePool& holdout, const Eigen::VectorXi& holdout_labels,
                        std::span<const CrossCandidate> candidates, int generation, const AutoCrossConfig& config);

struct CrossLedgerEntry {
    CrossCandidate candidate;
    double delta_loss = 0.0;
    double margin = 0.0;
    double gain_share = 0.0;
    bool degenerate = false;
    bool pruned = false;
};

struct CrossLedger {
    double base_loss = 0.0;
    std::vector<CrossLedgerEntry> accepted;
    int rejected = 0;

    std::vector<std::string> surviving_names() const;
    std::string to_text() const;
};

/// Full evolutionary search. Accepted crosses join the pool, and the base
/// model, before the next generation.
CrossLedger run_autocross(const FeaturePool& train, const Eigen::VectorXi& train_labels, const FeaturePool& holdout,
                          const Eigen::VectorXi& holdout_labels, const AutoCrossConfig& config);

/// Marks accepted crosses whose share of the total cross gain is below
/// `floor`, or whose gain is zero, as pruned. `gains` is indexed like
/// `ledger.accepted`.
CrossLedger prune(CrossLedger ledger, std::span<const double> gains, double floor);

/// Gain-based importance of every accepted cross from one probe booster
/// fitted on the pool with all accepted crosses appended.
std::vector<double> cross_importance(const CrossLedger& ledger, const FeaturePool& train,
                                     const Eigen::VectorXi& train_labels, const AutoCrossConfig& config);

/// Appends every surviving cross to `pool`; pruned crosses are computed only
/// when a survivor needs them.
FeaturePool apply_ledger(const CrossLedger& ledger, FeaturePool pool);

}  // namespace hydra
