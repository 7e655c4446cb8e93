#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hydra/errors.hpp"

namespace hydra {

enum class ColumnKind { Numeric, Categorical, Identifier, Label, Week, Group };

std::string_view to_string(ColumnKind kind);
std::optional<ColumnKind> parse_column_kind(std::string_view text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind;
};

struct Schema {
    std::vector<ColumnSpec> columns;
    /// Categorical columns whose shared values form graph edges.
    std::vector<std::string> key_columns;

    std::vector<std::string> validate() const;
    std::vector<std::string> names_of(ColumnKind kind) const;
    std::optional<std::size_t> find(std::string_view name) const;
};

inline constexpr std::int32_t kMissingCode = -1;
inline constexpr std::int32_t kUnknownCode = 0;
inline constexpr std::string_view kUnknownToken = "<UNK>";

/// Dense code assignment for one categorical column. Code 0 is reserved for
/// values unseen at ingestion time.
class Vocabulary {
public:
    Vocabulary();

    std::int32_t code_of(std::string_view token) const;
    std::int32_t add(std::string_view token);
    const std::string& token(std::int32_t code) const { return tokens_.at(static_cast<std::size_t>(code)); }
    std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> index_;
};

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Columnar table. Numeric columns hold NaN and categorical columns hold
/// kMissingCode where `missing` is set; mask columns are ordered numeric
/// first, then categorical, each in schema order.
struct FeatureFrame {
    Schema schema;
    Eigen::MatrixXd numeric;
    Eigen::MatrixXi categorical;
    std::vector<Vocabulary> vocabularies;
    MissingMask missing;
    std::vector<std::vector<std::string>> identifiers;
    Eigen::VectorXi week;
    Eigen::VectorXi group;
    std::optional<Eigen::VectorXi> label;

    Eigen::Index rows() const { return week.size(); }
    bool has_labels() const { return label.has_value(); }

    std::vector<std::string> numeric_names() const { return schema.names_of(ColumnKind::Numeric); }
    std::vector<std::string> categorical_names() const { return schema.names_of(ColumnKind::Categorical); }
    Eigen::Index numeric_index(std::string_view name) const;
    Eigen::Index categorical_index(std::string_view name) const;

    const Eigen::VectorXi& labels() const;

    /// Allocates storage for `n` rows matching `schema`; everything zeroed,
    /// no missing slots, labels present iff the schema has a label column.
    static FeatureFrame allocate(Schema schema, Eigen::Index n);

    /// Recomputes `missing` from the NaN / kMissingCode sentinels.
    void refresh_missing_mask();

    void add_numeric_column(std::string name, const Eigen::VectorXd& values);
    void drop_numeric_columns(std::span<const std::string> names);
};

FeatureFrame select_rows(const FeatureFrame& frame, std::span<const Eigen::Index> rows);

/// Returns every invariant violation; an empty list means the frame is valid.
std::vector<std::string> validate_frame(const FeatureFrame& frame);

enum class ModelId { GossGbdt, OrderedGbdt, DenseLight, Ensemble };

std::string_view to_string(ModelId id);

struct PredictionVector {
    Eigen::VectorXd probabilities;
    ModelId model = ModelId::Ensemble;

    bool valid() const;
};

struct MetricReport {
    double gini = 0.0;
    double gini_stable = 0.0;
    double brier = 0.0;
    double log_loss = 0.0;
    std::vector<std::pair<int, double>> per_week_gini;
};

struct GiniStableOptions {
    double std_coefficient = 0.5;
    double slope_penalty = 88.0;
};

inline constexpr double kProbabilityClip = 1e-15;

/// 2 * AUC - 1 with midrank handling of tied scores.
double gini(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& scores);

/// mean - c * std + penalty * min(0, slope) over the weekly Gini sequence,
/// where slope is the least-squares slope against the week index.
double gini_stable(std::span<const std::pair<int, double>> per_week, const GiniStableOptions& options = {});

double brier(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs);
double log_loss(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs);

/// Linear interpolation between order statistics: position (n - 1) * q.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> values, double q);

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace hydra
