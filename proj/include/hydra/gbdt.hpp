#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

enum class BoosterVariant { Goss, Ordered };

std::string_view to_string(BoosterVariant variant);
BoosterVariant parse_booster_variant(std::string_view text);

struct BoosterConfig {
    BoosterVariant variant = BoosterVariant::Goss;
    double learning_rate = 0.1;
    double lambda = 1.0;
    int max_bin = 63;
    int max_leaves = 31;
    int max_depth = -1;  // unlimited
    int min_data_in_leaf = 20;
    /// A split is taken only when its gain strictly exceeds this value.
    double min_split_gain = 1e-12;
    double goss_top_rate = 0.2;    // a
    double goss_other_rate = 0.1;  // b
    int early_stopping_rounds = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

/// First and second derivative of the log loss with respect to the margin.
struct GradHess {
    Eigen::VectorXd grad;
    Eigen::VectorXd hess;  // p (1 - p), floored to stay positive
};

GradHess logloss_grad_hess(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& margins);

/// G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)
inline double split_gain(double grad_left, double hess_left, double grad_right, double hess_right, double lambda) {
    const double g = grad_left + grad_right;
    return grad_left * grad_left / (hess_left + lambda) + grad_right * grad_right / (hess_right + lambda) -
           g * g / (hess_left + hess_right + lambda);
}

/// Rows kept by gradient-based one-side sampling, in ascending row order,
/// with weight 1 for the top floor(a N) rows by |g| and (1 - a) / b for the
/// floor(b N) rows drawn uniformly from the remainder.
struct GossSample {
    std::vector<Eigen::Index> rows;
    Eigen::VectorXd weights;
    std::size_t top_count = 0;
};

GossSample goss_sample(const Eigen::Ref<const Eigen::VectorXd>& grad_magnitudes, double top_rate, double other_rate,
                       std::uint64_t seed);

/// Per-feature quantile bin edges. A value x lands in bin
/// #{edges < x}; NaN lands in bin 0.
class BinMapper {
public:
    BinMapper() = default;
    static BinMapper fit(const Eigen::MatrixXd& features, int max_bin);

    Eigen::Index features() const { return static_cast<Eigen::Index>(edges_.size()); }
    int bins(Eigen::Index feature) const { return static_cast<int>(edges_[static_cast<std::size_t>(feature)].size()) + 1; }
    const std::vector<double>& edges(Eigen::Index feature) const { return edges_[static_cast<std::size_t>(feature)]; }
    std::uint8_t bin(Eigen::Index feature, double value) const;

    /// Column-major binned copy: element (i, f) at f * rows + i.
    std::vector<std::uint8_t> transform(const Eigen::MatrixXd& features) const;

    static BinMapper from_edges(std::vector<std::vector<double>> edges);

private:
    std::vector<std::vector<double>> edges_;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x <= threshold (or x is NaN)
    int bin = -1;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf contribution to the margin, learning rate applied
    double gain = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    int depth() const;
};

struct Holdout {
    const Eigen::MatrixXd& features;
    const Eigen::VectorXi& labels;
};

struct FitReport {
    int rounds_requested = 0;
    int trees_added = 0;
    int trees_skipped = 0;
    /// Last kept round with a holdout; -1 when no round beat the incoming forest.
    int best_iteration = -1;
    std::vector<double> train_loss;    // after each round
    std::vector<double> holdout_loss;  // after each round, when a holdout was given
};

class Booster {
public:
    Booster() = default;
    explicit Booster(BoosterConfig config);

    /// Fresh fit: learns bin edges and the prior log-odds, then boosts.
    FitReport fit(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds,
                  const Holdout* holdout = nullptr);

    /// Appends up to `rounds` trees fitted against margins of the current
    /// forest on the new batch; existing trees and bin edges are untouched.
    FitReport warm_start(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds,
                         const Holdout* holdout = nullptr);

    Eigen::VectorXd predict_margin(const Eigen::MatrixXd& features) const;
    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& features) const;

    /// Sum of split gains per feature.
    Eigen::VectorXd feature_importance() const;

    bool fitted() const { return fitted_; }
    const BoosterConfig& config() const { return config_; }
    BoosterConfig& mutable_config() { return config_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const BinMapper& bin_mapper() const { return bins_; }
    double base_score() const { return base_score_; }
    int rounds_completed() const { return rounds_completed_; }
    int trees_skipped() const { return trees_skipped_; }

    std::string serialize() const;
    static Booster deserialize(const std::string& text);

private:
    FitReport boost(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, int rounds, const Holdout* holdout);

    BoosterConfig config_;
    BinMapper bins_;
    std::vector<Tree> trees_;
    double base_score_ = 0.0;
    int rounds_completed_ = 0;
    int trees_skipped_ = 0;
    bool fitted_ = false;
};

/// Grows a single tree on pre-binned data against per-row gradient and
/// hessian (already multiplied by any sample weights). Returns a tree with a
/// single leaf when no split clears `min_split_gain`.
Tree grow_tree(const BinMapper& bins, std::span<const std::uint8_t> binned, Eigen::Index total_rows,
               std::span<const Eigen::Index> rows, const Eigen::VectorXd& grad, const Eigen::VectorXd& hess,
               const BoosterConfig& config);

/// Row i's encoding uses only rows that precede it in a seeded random
/// permutation: (sum_y + smoothing * prior) / (count + smoothing).
Eigen::VectorXd ordered_target_statistics(std::span<const std::int32_t> codes, std::span<const int> labels,
                                          std::uint64_t permutation_seed, double prior, double smoothing = 1.0);

}  // namespace hydra
