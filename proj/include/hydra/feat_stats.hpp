#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

struct WindowSpec {
    int window = 4;
    std::vector<double> quantiles{0.25, 0.5, 0.75};
    std::vector<int> lags{1};

    void validate() const;
};

/// Trailing-window statistics at every position of a series. Positions with
/// fewer than `window` observations use the available prefix and have
/// `full_window` false.
struct RollingFeatures {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // population
    Eigen::VectorXd max;
    Eigen::VectorXd trend;  // (last - first) / length
    Eigen::VectorXd rolling_std;
    Eigen::VectorXd coeff_var;  // std / |mean|, 0 when the mean vanishes
    Eigen::VectorXd first_diff;  // x_t - x_{t-1}, 0 at t = 0
    Eigen::VectorXd event_count;  // nonzero observations in the window
    Eigen::Array<bool, Eigen::Dynamic, 1> full_window;
};

RollingFeatures rolling_stats(const Eigen::Ref<const Eigen::VectorXd>& series, const WindowSpec& spec);

struct LagQuantileFeatures {
    Eigen::MatrixXd lags;  // T x |lags|, NaN where the lag reaches before t = 0
    MissingMask lag_missing;
    Eigen::MatrixXd quantiles;  // T x |quantiles| over the trailing window
};

LagQuantileFeatures lag_and_quantile(const Eigen::Ref<const Eigen::VectorXd>& series, const WindowSpec& spec);

/// One row per series: every rolling, lag and quantile feature evaluated at
/// the final position, plus the window-validity flag.
Eigen::MatrixXd summarize_series(const Eigen::MatrixXd& series_rows, const WindowSpec& spec);
std::vector<std::string> summary_feature_names(const std::string& prefix, const WindowSpec& spec);

// ---------------------------------------------------------------------------
// Target encoding: TE(c) = (sum_{i in I(c)} y_i + prior) / (|I(c)| + strength) + noise_c

struct TargetEncoderParams {
    double prior = 0.0;     // mu, usually the training positive rate
    double strength = 1.0;  // lambda_te
    double noise = 0.0;     // std of the per-category Gaussian perturbation
    std::uint64_t seed = 0;
};

class TargetEncoder {
public:
    TargetEncoder() = default;
    TargetEncoder(std::span<const std::int32_t> codes, std::span<const int> labels, const TargetEncoderParams& params,
                  int fold = 0);

    double value(std::int32_t code) const;
    Eigen::VectorXd encode(std::span<const std::int32_t> codes) const;

    /// The cached perturbation for `code` in this encoder's fold.
    double noise_for(std::int32_t code) const;

    double count(std::int32_t code) const;
    const TargetEncoderParams& params() const { return params_; }

private:
    TargetEncoderParams params_;
    int fold_ = 0;
    std::vector<double> sums_;
    std::vector<double> counts_;
};

TargetEncoder fit_target_encoder(const FeatureFrame& train, const std::string& column,
                                 const TargetEncoderParams& params);

/// Row i is encoded by an encoder fitted on every fold except folds[i].
Eigen::VectorXd out_of_fold_target_encoding(std::span<const std::int32_t> codes, std::span<const int> labels,
                                            std::span<const int> folds, const TargetEncoderParams& params);

// ---------------------------------------------------------------------------
// Frequency ratios

class FrequencyEncoder {
public:
    FrequencyEncoder() = default;
    explicit FrequencyEncoder(std::span<const std::int32_t> codes);

    double frequency(std::int32_t code) const;
    double dominance(std::int32_t code) const;
    /// N x 2: (category_frequency, category_dominance).
    Eigen::MatrixXd transform(std::span<const std::int32_t> codes) const;

private:
    std::vector<double> counts_;
    double total_ = 0.0;
    double max_count_ = 0.0;
};

FrequencyEncoder frequency_ratios(const FeatureFrame& train, const std::string& column);

// ---------------------------------------------------------------------------
// Cardinality routing

enum class CategoricalRoute { OneHot, Ordinal, Target };

std::string_view to_string(CategoricalRoute route);

struct CardinalityThresholds {
    int one_hot_below = 10;   // T1
    int ordinal_up_to = 100;  // T2
};

/// One-hot when the training cardinality is below T1, frequency-ranked
/// ordinal codes up to T2, target encoding above T2.
struct CategoricalEncoding {
    std::string column;
    CategoricalRoute route = CategoricalRoute::OneHot;
    int cardinality = 0;
    std::vector<std::int32_t> one_hot_codes;
    std::vector<std::string> one_hot_tokens;
    std::vector<int> ordinal_rank;  // indexed by code; -1 when unseen
    TargetEncoder target;

    std::vector<std::string> output_names() const;
    Eigen::MatrixXd transform(std::span<const std::int32_t> codes) const;
};

CategoricalEncoding fit_categorical_encoding(const FeatureFrame& train, const std::string& column,
                                             const CardinalityThresholds& thresholds = {},
                                             const TargetEncoderParams& target_params = {});

std::vector<std::int32_t> column_codes(const FeatureFrame& frame, const std::string& column);

}  // namespace hydra
