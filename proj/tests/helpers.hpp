#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"
#include "hydra/random.hpp"

namespace hydra::test {

/// week, group, y plus the given numeric columns.
inline Schema numeric_schema(const std::vector<std::string>& numeric) {
    Schema schema;
    schema.columns = {{"week", ColumnKind::Week}, {"group", ColumnKind::Group}, {"y", ColumnKind::Label}};
    for (const auto& name : numeric) schema.columns.push_back({name, ColumnKind::Numeric});
    return schema;
}

/// Frame whose numeric block is `values`; weeks, groups and labels as given
/// (groups default to one per row).
inline FeatureFrame numeric_frame(const std::vector<std::string>& names, const Eigen::MatrixXd& values,
                                  const std::vector<int>& weeks, const std::vector<int>& labels,
                                  std::vector<int> groups = {}) {
    FeatureFrame frame = FeatureFrame::allocate(numeric_schema(names), values.rows());
    frame.numeric = values;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        frame.week(i) = weeks[static_cast<std::size_t>(i)];
        frame.group(i) = groups.empty() ? static_cast<int>(i) : groups[static_cast<std::size_t>(i)];
        (*frame.label)(i) = labels[static_cast<std::size_t>(i)];
    }
    frame.refresh_missing_mask();
    return frame;
}

/// One categorical column "cat" (tokens as given, "" for missing) plus week,
/// group and label.
inline FeatureFrame categorical_frame(const std::vector<std::string>& tokens, const std::vector<int>& labels) {
    Schema schema;
    schema.columns = {{"week", ColumnKind::Week}, {"group", ColumnKind::Group}, {"y", ColumnKind::Label},
                      {"cat", ColumnKind::Categorical}};
    const auto n = static_cast<Eigen::Index>(tokens.size());
    FeatureFrame frame = FeatureFrame::allocate(schema, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = tokens[static_cast<std::size_t>(i)];
        frame.categorical(i, 0) = t.empty() ? kMissingCode : frame.vocabularies[0].add(t);
        frame.week(i) = 1;
        frame.group(i) = static_cast<int>(i);
        (*frame.label)(i) = labels[static_cast<std::size_t>(i)];
    }
    frame.refresh_missing_mask();
    return frame;
}

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace hydra::test
