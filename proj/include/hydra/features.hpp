#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydra/autocross.hpp"
#include "hydra/core_data.hpp"
#include "hydra/feat_stats.hpp"
#include "hydra/graph_synth.hpp"
#include "hydra/preprocess.hpp"
#include "hydra/spectro.hpp"

namespace hydra {

struct FeatureOptions {
    /// Numeric columns with this prefix form each row's weekly series, in
    /// schema order; all other numeric columns are base features.
    std::string series_prefix = "hist_";
    bool graph = true;
    bool autocross = true;
    bool spectro = true;

    WindowSpec window;
    WaveletFamily wavelet = WaveletFamily::MexicanHat;
    std::vector<double> wavelet_scales;  // empty: dyadic defaults
    std::vector<int> frequencies;        // empty: 1..T/2
    double spectral_variance_quantile = 0.5;

    CardinalityThresholds thresholds;
    double te_strength = 1.0;
    double te_noise = 0.0;
    int te_folds = 5;

    bool psi_screen = true;
    double psi_threshold = 0.2;
    int psi_bins = 10;

    bool drift_normalize = true;
    int drift_period_weeks = 1;

    GraphOptions graph_options;
    GatConfig gat;

    AutoCrossConfig autocross_config;
    double autocross_holdout_fraction = 0.3;

    /// Dense-network inputs are clipped to [-dense_clip, dense_clip].
    double dense_clip = 10.0;

    void validate() const;
};

/// Which leakage-safe target statistic the fitting rows receive.
enum class TargetMode { OutOfFold, Ordered };

/// Feature transforms fitted once on the fitting rows and then frozen. Every
/// row's features depend only on the frozen transforms, its own raw values,
/// statistics of its own week and, through the causal graph, rows of the
/// same or earlier weeks.
class FeaturePipeline {
public:
    static FeaturePipeline fit(const FeatureFrame& frame, std::span<const Eigen::Index> fit_rows,
                               std::span<const Eigen::Index> fit_validation_rows, const FeatureOptions& options,
                               std::uint64_t seed);

    const std::vector<std::string>& names() const { return names_; }
    Eigen::Index columns() const { return static_cast<Eigen::Index>(names_.size()); }

    Eigen::MatrixXd rows(std::span<const Eigen::Index> rows, TargetMode mode) const;
    /// Clipped, NaN-free copy for the dense network.
    Eigen::MatrixXd dense_rows(std::span<const Eigen::Index> rows) const;

    const CrossLedger& cross_ledger() const { return ledger_; }
    const PsiReport& psi_report() const { return psi_; }
    const std::optional<GatTrainLog>& gat_log() const { return gat_log_; }
    const std::vector<std::string>& block_names() const { return block_names_; }
    const std::vector<Eigen::Index>& block_sizes() const { return block_sizes_; }

private:
    std::vector<std::string> names_;
    std::vector<std::string> block_names_;
    std::vector<Eigen::Index> block_sizes_;
    Eigen::MatrixXd out_of_fold_;
    Eigen::MatrixXd ordered_;
    double dense_clip_ = 10.0;
    CrossLedger ledger_;
    PsiReport psi_;
    std::optional<GatTrainLog> gat_log_;
};

}  // namespace hydra
