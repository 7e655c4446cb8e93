#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

inline constexpr double kScaleFloor = 1e-12;

// ---------------------------------------------------------------------------
// Folds

/// Group-atomic stratified folds. `fold_rows[k]` lists the rows of fold k in
/// (week, row) order.
struct FoldPlan {
    int k = 0;
    double epsilon = 0.02;
    double global_rate = 0.0;
    std::vector<int> assignment;
    std::vector<double> fold_bias;
    std::vector<std::vector<Eigen::Index>> fold_rows;
};

/// Greedy group bin-packing on positive counts followed by pairwise group
/// swaps that shrink the worst fold bias. Throws FoldError naming the first
/// fold whose bias reaches `epsilon` or which ends up empty.
FoldPlan build_folds(const FeatureFrame& frame, int k, double epsilon = 0.02, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Missing values

struct ImputationModel {
    std::vector<std::string> numeric_columns;
    Eigen::VectorXd numeric_fill;  // medians
    std::vector<std::string> categorical_columns;
    std::vector<std::int32_t> categorical_fill;  // modes
    /// Columns that had missing values at fit time; each gets "<name>_missing".
    std::vector<std::string> indicator_columns;
};

ImputationModel fit_imputer(const FeatureFrame& train);
FeatureFrame apply_imputer(const ImputationModel& model, FeatureFrame frame);

std::string missing_indicator_name(const std::string& column);

// ---------------------------------------------------------------------------
// Per-period drift normalization

struct PeriodStats {
    double mean = 0.0;
    double stddev = 1.0;
};

struct DriftNormalizer {
    int period_weeks = 1;
    std::vector<std::string> columns;
    /// period index -> per-column statistics (population std, floored).
    std::map<int, std::vector<PeriodStats>> periods;

    int period_of(int week) const { return week / period_weeks; }
};

struct DriftReport {
    /// One entry per (period, source period) substitution.
    std::vector<std::string> fallbacks;
};

/// Matrix form: column j of `values` is feature `columns[j]`. Periods with
/// fewer than two observed rows are left unfitted.
DriftNormalizer fit_drift_normalizer(const Eigen::MatrixXd& values, const Eigen::VectorXi& weeks,
                                     std::vector<std::string> columns, int period_weeks);
Eigen::MatrixXd apply_drift_normalizer(const DriftNormalizer& normalizer, const Eigen::MatrixXd& values,
                                       const Eigen::VectorXi& weeks, DriftReport* report = nullptr);

/// Frame form over the named numeric columns (all numeric columns if empty).
DriftNormalizer fit_drift_normalizer(const FeatureFrame& frame, int period_weeks,
                                     std::vector<std::string> columns = {});
FeatureFrame apply_drift_normalizer(const DriftNormalizer& normalizer, FeatureFrame frame,
                                    DriftReport* report = nullptr);

// ---------------------------------------------------------------------------
// Population stability

/// Interior quantile edges of `reference` at i / n_bins, i = 1..n_bins-1.
/// Bin b holds values v with edges[b-1] < v <= edges[b].
std::vector<double> quantile_bin_edges(std::span<const double> reference, int n_bins);

std::vector<double> bin_counts(std::span<const double> values, std::span<const double> edges);

/// Sum over reference-quantile bins of (p - q) ln(p / q), with `smoothing`
/// pseudo-counts added to every bin. NaNs are ignored.
double psi(std::span<const double> reference, std::span<const double> comparison, int n_bins = 10,
           double smoothing = 0.5);

enum class PsiAction { Keep, Rebin, Drop };

std::string_view to_string(PsiAction action);

struct PsiEntry {
    std::string feature;
    double psi = 0.0;
    double psi_after_rebin = 0.0;
    int bins = 0;
    std::vector<double> edges;  // coarse edges when action == Rebin
    PsiAction action = PsiAction::Keep;
};

struct PsiReport {
    double threshold = 0.2;
    int reference_week = 0;
    int comparison_week = 0;
    std::vector<PsiEntry> entries;
};

/// Compares the earliest and latest week per numeric column. Features above
/// `threshold` are re-evaluated on ceil(n_bins / 2) bins and marked Rebin if
/// that brings them under the threshold, Drop otherwise.
PsiReport screen_features(const FeatureFrame& frame, double threshold = 0.2, int n_bins = 10,
                          std::vector<std::string> columns = {});

/// Drops Drop columns and replaces Rebin columns by their coarse bin index.
FeatureFrame apply_psi_report(const PsiReport& report, FeatureFrame frame);

// ---------------------------------------------------------------------------
// Robust scaling

struct RobustScaler {
    std::vector<std::string> columns;
    Eigen::VectorXd median;
    Eigen::VectorXd iqr;  // floored at kScaleFloor

    Eigen::MatrixXd transform(const Eigen::MatrixXd& values) const;
};

RobustScaler fit_robust_scaler(const Eigen::MatrixXd& train, std::vector<std::string> columns = {});
RobustScaler fit_robust_scaler(const FeatureFrame& train);
FeatureFrame apply_robust_scaler(const RobustScaler& scaler, FeatureFrame frame);

}  // namespace hydra
