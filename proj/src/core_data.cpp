#include "hydra/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hydra {

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Numeric: return "numeric";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Identifier: return "identifier";
        case ColumnKind::Label: return "label";
        case ColumnKind::Week: return "week";
        case ColumnKind::Group: return "group";
    }
    return "unknown";
}

std::optional<ColumnKind> parse_column_kind(std::string_view text) {
    for (auto kind : {ColumnKind::Numeric, ColumnKind::Categorical, ColumnKind::Identifier, ColumnKind::Label,
                      ColumnKind::Week, ColumnKind::Group}) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

std::vector<std::string> Schema::validate() const {
    std::vector<std::string> errors;
    std::set<std::string> seen;
    int labels = 0, weeks = 0, groups = 0;
    for (const auto& column : columns) {
        if (!seen.insert(column.name).second) errors.push_back("duplicate column \"" + column.name + "\"");
        labels += column.kind == ColumnKind::Label;
        weeks += column.kind == ColumnKind::Week;
        groups += column.kind == ColumnKind::Group;
    }
    if (labels != 1) errors.push_back("expected exactly one label column, found " + std::to_string(labels));
    if (weeks != 1) errors.push_back("expected exactly one week column, found " + std::to_string(weeks));
    if (groups != 1) errors.push_back("expected exactly one group column, found " + std::to_string(groups));
    for (const auto& key : key_columns) {
        auto idx = find(key);
        if (!idx || columns[*idx].kind != ColumnKind::Categorical) {
            errors.push_back("key column \"" + key + "\" is not a categorical column");
        }
    }
    return errors;
}

std::vector<std::string> Schema::names_of(ColumnKind kind) const {
    std::vector<std::string> names;
    for (const auto& column : columns) {
        if (column.kind == kind) names.push_back(column.name);
    }
    return names;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    return std::nullopt;
}

Vocabulary::Vocabulary() { add(kUnknownToken); }

std::int32_t Vocabulary::code_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnknownCode : it->second;
}

std::int32_t Vocabulary::add(std::string_view token) {
    auto [it, inserted] = index_.try_emplace(std::string(token), static_cast<std::int32_t>(tokens_.size()));
    if (inserted) tokens_.emplace_back(token);
    return it->second;
}

namespace {

Eigen::Index index_among(const Schema& schema, ColumnKind kind, std::string_view name) {
    Eigen::Index i = 0;
    for (const auto& column : schema.columns) {
        if (column.kind != kind) continue;
        if (column.name == name) return i;
        ++i;
    }
    throw DataError("no " + std::string(to_string(kind)) + " column named \"" + std::string(name) + "\"");
}

}  // namespace

Eigen::Index FeatureFrame::numeric_index(std::string_view name) const {
    return index_among(schema, ColumnKind::Numeric, name);
}

Eigen::Index FeatureFrame::categorical_index(std::string_view name) const {
    return index_among(schema, ColumnKind::Categorical, name);
}

const Eigen::VectorXi& FeatureFrame::labels() const {
    if (!label) throw DataError("frame has no labels");
    return *label;
}

FeatureFrame FeatureFrame::allocate(Schema schema, Eigen::Index n) {
    FeatureFrame frame;
    const auto n_num = static_cast<Eigen::Index>(schema.names_of(ColumnKind::Numeric).size());
    const auto n_cat = static_cast<Eigen::Index>(schema.names_of(ColumnKind::Categorical).size());
    const auto n_id = schema.names_of(ColumnKind::Identifier).size();
    const bool labelled = !schema.names_of(ColumnKind::Label).empty();
    frame.schema = std::move(schema);
    frame.numeric = Eigen::MatrixXd::Zero(n, n_num);
    frame.categorical = Eigen::MatrixXi::Zero(n, n_cat);
    frame.vocabularies.assign(static_cast<std::size_t>(n_cat), Vocabulary{});
    frame.missing = MissingMask::Constant(n, n_num + n_cat, false);
    frame.identifiers.assign(n_id, std::vector<std::string>(static_cast<std::size_t>(n)));
    frame.week = Eigen::VectorXi::Zero(n);
    frame.group = Eigen::VectorXi::Zero(n);
    if (labelled) frame.label = Eigen::VectorXi::Zero(n);
    return frame;
}

void FeatureFrame::refresh_missing_mask() {
    const Eigen::Index n = rows();
    const Eigen::Index n_num = numeric.cols();
    missing.resize(n, n_num + categorical.cols());
    for (Eigen::Index j = 0; j < n_num; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) missing(i, j) = std::isnan(numeric(i, j));
    }
    for (Eigen::Index j = 0; j < categorical.cols(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) missing(i, n_num + j) = categorical(i, j) == kMissingCode;
    }
}

void FeatureFrame::add_numeric_column(std::string name, const Eigen::VectorXd& values) {
    if (values.size() != rows()) throw ShapeError("column \"" + name + "\" has wrong length");
    // Insert after the last numeric column in schema order.
    std::size_t insert_at = 0;
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
        if (schema.columns[i].kind == ColumnKind::Numeric) insert_at = i + 1;
    }
    schema.columns.insert(schema.columns.begin() + static_cast<std::ptrdiff_t>(insert_at),
                          ColumnSpec{std::move(name), ColumnKind::Numeric});
    numeric.conservativeResize(Eigen::NoChange, numeric.cols() + 1);
    numeric.col(numeric.cols() - 1) = values;
    refresh_missing_mask();
}

void FeatureFrame::drop_numeric_columns(std::span<const std::string> names) {
    if (names.empty()) return;
    const auto all = numeric_names();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(all.size()); ++j) {
        if (std::find(names.begin(), names.end(), all[static_cast<std::size_t>(j)]) == names.end()) keep.push_back(j);
    }
    Eigen::MatrixXd kept = numeric(Eigen::all, keep);
    numeric = std::move(kept);
    std::erase_if(schema.columns, [&](const ColumnSpec& c) {
        return c.kind == ColumnKind::Numeric && std::find(names.begin(), names.end(), c.name) != names.end();
    });
    refresh_missing_mask();
}

FeatureFrame select_rows(const FeatureFrame& frame, std::span<const Eigen::Index> rows) {
    FeatureFrame out;
    out.schema = frame.schema;
    out.vocabularies = frame.vocabularies;
    const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    out.numeric = frame.numeric(idx, Eigen::all);
    out.categorical = frame.categorical(idx, Eigen::all);
    out.missing = frame.missing(idx, Eigen::all);
    out.week = frame.week(idx);
    out.group = frame.group(idx);
    if (frame.label) out.label = Eigen::VectorXi((*frame.label)(idx));
    out.identifiers.resize(frame.identifiers.size());
    for (std::size_t c = 0; c < frame.identifiers.size(); ++c) {
        out.identifiers[c].reserve(idx.size());
        for (auto r : idx) out.identifiers[c].push_back(frame.identifiers[c][static_cast<std::size_t>(r)]);
    }
    return out;
}

std::vector<std::string> validate_frame(const FeatureFrame& frame) {
    std::vector<std::string> errors = frame.schema.validate();
    const Eigen::Index n = frame.rows();
    const auto n_num = static_cast<Eigen::Index>(frame.numeric_names().size());
    const auto n_cat = static_cast<Eigen::Index>(frame.categorical_names().size());

    auto check_rows = [&](Eigen::Index got, const char* what) {
        if (got != n) errors.push_back(std::string(what) + " has " + std::to_string(got) + " rows, expected " +
                                       std::to_string(n));
    };
    check_rows(frame.group.size(), "group column");
    check_rows(frame.numeric.rows(), "numeric block");
    check_rows(frame.categorical.rows(), "categorical block");
    check_rows(frame.missing.rows(), "missing mask");
    if (frame.label) check_rows(frame.label->size(), "label column");
    for (const auto& ids : frame.identifiers) check_rows(static_cast<Eigen::Index>(ids.size()), "identifier column");

    if (frame.numeric.cols() != n_num) errors.push_back("numeric block width does not match schema");
    if (frame.categorical.cols() != n_cat) errors.push_back("categorical block width does not match schema");
    if (static_cast<Eigen::Index>(frame.vocabularies.size()) != n_cat) {
        errors.push_back("vocabulary count does not match categorical columns");
    }
    if (frame.missing.cols() != n_num + n_cat) errors.push_back("missing mask width does not match schema");
    if (!errors.empty()) return errors;

    const auto cat_names = frame.categorical_names();
    const auto num_names = frame.numeric_names();
    for (Eigen::Index j = 0; j < n_cat; ++j) {
        const auto vocab = frame.vocabularies[static_cast<std::size_t>(j)].size();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto code = frame.categorical(i, j);
            if (code >= vocab || code < kMissingCode) {
                errors.push_back("categorical code " + std::to_string(code) + " out of vocabulary in column \"" +
                                 cat_names[static_cast<std::size_t>(j)] + "\" at row " + std::to_string(i));
            }
            if ((code == kMissingCode) != frame.missing(i, n_num + j)) {
                errors.push_back("missing mask disagrees with sentinel in column \"" +
                                 cat_names[static_cast<std::size_t>(j)] + "\" at row " + std::to_string(i));
            }
        }
    }
    for (Eigen::Index j = 0; j < n_num; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(frame.numeric(i, j)) != frame.missing(i, j)) {
                errors.push_back("missing mask disagrees with sentinel in column \"" +
                                 num_names[static_cast<std::size_t>(j)] + "\" at row " + std::to_string(i));
            }
        }
    }
    if (frame.label) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = (*frame.label)(i);
            if (y != 0 && y != 1) errors.push_back("non-binary label at row " + std::to_string(i));
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (frame.week(i) < 0) errors.push_back("negative week at row " + std::to_string(i));
    }
    return errors;
}

std::string_view to_string(ModelId id) {
    switch (id) {
        case ModelId::GossGbdt: return "goss_gbdt";
        case ModelId::OrderedGbdt: return "ordered_gbdt";
        case ModelId::DenseLight: return "denselight";
        case ModelId::Ensemble: return "ensemble";
    }
    return "unknown";
}

bool PredictionVector::valid() const {
    return (probabilities.array().isFinite() && probabilities.array() >= 0.0 && probabilities.array() <= 1.0).all();
}

double gini(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& scores) {
    const Eigen::Index n = labels.size();
    if (scores.size() != n) throw ShapeError("gini: labels and scores differ in length");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores(a) < scores(b); });

    // Mann-Whitney U from the rank sum of positives; ties share their midrank.
    double rank_sum = 0.0;
    double positives = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels(order[k]) == 1) {
                rank_sum += midrank;
                positives += 1.0;
            }
        }
        i = j + 1;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw MetricError("gini undefined: labels contain a single class");
    const double auc = (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
    return 2.0 * auc - 1.0;
}

double gini_stable(std::span<const std::pair<int, double>> per_week, const GiniStableOptions& options) {
    if (per_week.size() < 2) throw MetricError("gini_stable undefined: fewer than two weeks");
    const double n = static_cast<double>(per_week.size());
    double mean_w = 0.0, mean_g = 0.0;
    for (const auto& [w, g] : per_week) {
        mean_w += w;
        mean_g += g;
    }
    mean_w /= n;
    mean_g /= n;
    double sxx = 0.0, sxy = 0.0, var = 0.0;
    for (const auto& [w, g] : per_week) {
        sxx += (w - mean_w) * (w - mean_w);
        sxy += (w - mean_w) * (g - mean_g);
        var += (g - mean_g) * (g - mean_g);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    const double stddev = std::sqrt(var / n);
    return mean_g - options.std_coefficient * stddev + options.slope_penalty * std::min(0.0, slope);
}

double brier(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs) {
    if (labels.size() != probs.size()) throw ShapeError("brier: length mismatch");
    if (labels.size() == 0) throw MetricError("brier undefined on empty input");
    return (probs - labels.cast<double>()).squaredNorm() / static_cast<double>(labels.size());
}

double log_loss(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs) {
    if (labels.size() != probs.size()) throw ShapeError("log_loss: length mismatch");
    if (labels.size() == 0) throw MetricError("log_loss undefined on empty input");
    double total = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probs(i), kProbabilityClip, 1.0 - kProbabilityClip);
        total -= labels(i) == 1 ? std::log(p) : std::log1p(-p);
    }
    return total / static_cast<double>(labels.size());
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DataError("quantile of empty sample");
    const double pos = static_cast<double>(sorted.size() - 1) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, q);
}

}  // namespace hydra
