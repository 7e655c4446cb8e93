#include "hydra/feat_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hydra/random.hpp"

namespace hydra {

void WindowSpec::validate() const {
    if (window < 2) throw ConfigError("window length must be at least 2");
    for (double q : quantiles) {
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("window quantiles must lie in (0, 1)");
    }
    for (int k : lags) {
        if (k < 1) throw ConfigError("lags must be positive");
    }
}

RollingFeatures rolling_stats(const Eigen::Ref<const Eigen::VectorXd>& series, const WindowSpec& spec) {
    spec.validate();
    const Eigen::Index n = series.size();
    RollingFeatures out;
    for (auto* v : {&out.mean, &out.variance, &out.max, &out.trend, &out.rolling_std, &out.coeff_var,
                    &out.first_diff, &out.event_count}) {
        v->resize(n);
    }
    out.full_window.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index start = std::max<Eigen::Index>(0, t - spec.window + 1);
        const Eigen::Index len = t - start + 1;
        const auto window = series.segment(start, len);
        const double mean = window.mean();
        const double var = (window.array() - mean).square().mean();
        out.mean(t) = mean;
        out.variance(t) = var;
        out.max(t) = window.maxCoeff();
        out.trend(t) = (window(len - 1) - window(0)) / static_cast<double>(len);
        out.rolling_std(t) = std::sqrt(var);
        out.coeff_var(t) = std::abs(mean) > 1e-12 ? std::sqrt(var) / std::abs(mean) : 0.0;
        out.first_diff(t) = t > 0 ? series(t) - series(t - 1) : 0.0;
        out.event_count(t) = static_cast<double>((window.array() != 0.0).count());
        out.full_window(t) = len == spec.window;
    }
    return out;
}

LagQuantileFeatures lag_and_quantile(const Eigen::Ref<const Eigen::VectorXd>& series, const WindowSpec& spec) {
    spec.validate();
    const Eigen::Index n = series.size();
    const auto n_lags = static_cast<Eigen::Index>(spec.lags.size());
    const auto n_q = static_cast<Eigen::Index>(spec.quantiles.size());
    LagQuantileFeatures out;
    out.lags.resize(n, n_lags);
    out.lag_missing.resize(n, n_lags);
    out.quantiles.resize(n, n_q);
    std::vector<double> window;
    for (Eigen::Index t = 0; t < n; ++t) {
        for (Eigen::Index c = 0; c < n_lags; ++c) {
            const Eigen::Index src = t - spec.lags[static_cast<std::size_t>(c)];
            out.lag_missing(t, c) = src < 0;
            out.lags(t, c) = src < 0 ? std::numeric_limits<double>::quiet_NaN() : series(src);
        }
        const Eigen::Index start = std::max<Eigen::Index>(0, t - spec.window + 1);
        window.assign(series.data() + start, series.data() + t + 1);
        std::sort(window.begin(), window.end());
        for (Eigen::Index c = 0; c < n_q; ++c) {
            out.quantiles(t, c) = quantile_sorted(window, spec.quantiles[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

std::vector<std::string> summary_feature_names(const std::string& prefix, const WindowSpec& spec) {
    std::vector<std::string> names;
    for (const char* s : {"mean", "variance", "max", "trend", "rolling_std", "coeff_var", "first_diff",
                          "event_count", "full_window"}) {
        names.push_back(prefix + "_" + s);
    }
    for (int k : spec.lags) names.push_back(prefix + "_lag" + std::to_string(k));
    for (double q : spec.quantiles) names.push_back(prefix + "_q" + std::to_string(static_cast<int>(std::lround(q * 100))));
    return names;
}

Eigen::MatrixXd summarize_series(const Eigen::MatrixXd& series_rows, const WindowSpec& spec) {
    const auto width = static_cast<Eigen::Index>(9 + spec.lags.size() + spec.quantiles.size());
    Eigen::MatrixXd out(series_rows.rows(), width);
    if (series_rows.cols() == 0) throw ShapeError("summarize_series: empty series");
    const Eigen::Index last = series_rows.cols() - 1;
    for (Eigen::Index i = 0; i < series_rows.rows(); ++i) {
        const Eigen::VectorXd s = series_rows.row(i).transpose();
        const auto r = rolling_stats(s, spec);
        const auto lq = lag_and_quantile(s, spec);
        Eigen::Index c = 0;
        out(i, c++) = r.mean(last);
        out(i, c++) = r.variance(last);
        out(i, c++) = r.max(last);
        out(i, c++) = r.trend(last);
        out(i, c++) = r.rolling_std(last);
        out(i, c++) = r.coeff_var(last);
        out(i, c++) = r.first_diff(last);
        out(i, c++) = r.event_count(last);
        out(i, c++) = r.full_window(last) ? 1.0 : 0.0;
        for (Eigen::Index k = 0; k < lq.lags.cols(); ++k) out(i, c++) = lq.lags(last, k);
        for (Eigen::Index k = 0; k < lq.quantiles.cols(); ++k) out(i, c++) = lq.quantiles(last, k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Target encoding

TargetEncoder::TargetEncoder(std::span<const std::int32_t> codes, std::span<const int> labels,
                             const TargetEncoderParams& params, int fold)
    : params_(params), fold_(fold) {
    if (codes.size() != labels.size()) throw ShapeError("target encoder: codes and labels differ in length");
    std::int32_t max_code = -1;
    for (auto c : codes) max_code = std::max(max_code, c);
    sums_.assign(static_cast<std::size_t>(max_code + 1), 0.0);
    counts_.assign(static_cast<std::size_t>(max_code + 1), 0.0);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] < 0) continue;
        sums_[static_cast<std::size_t>(codes[i])] += labels[i];
        counts_[static_cast<std::size_t>(codes[i])] += 1.0;
    }
}

double TargetEncoder::count(std::int32_t code) const {
    return code >= 0 && static_cast<std::size_t>(code) < counts_.size() ? counts_[static_cast<std::size_t>(code)] : 0.0;
}

double TargetEncoder::noise_for(std::int32_t code) const {
    if (params_.noise == 0.0) return 0.0;
    Rng rng(mix64(params_.seed, static_cast<std::uint64_t>(fold_), static_cast<std::uint64_t>(code + 1)));
    return params_.noise * rng.normal();
}

double TargetEncoder::value(std::int32_t code) const {
    const double n = count(code);
    const double sum = n > 0.0 ? sums_[static_cast<std::size_t>(code)] : 0.0;
    const double denom = n + params_.strength;
    const double base = denom > 0.0 ? (sum + params_.prior) / denom : params_.prior;
    return base + noise_for(code);
}

Eigen::VectorXd TargetEncoder::encode(std::span<const std::int32_t> codes) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i) out(static_cast<Eigen::Index>(i)) = value(codes[i]);
    return out;
}

std::vector<std::int32_t> column_codes(const FeatureFrame& frame, const std::string& column) {
    const Eigen::Index j = frame.categorical_index(column);
    std::vector<std::int32_t> codes(static_cast<std::size_t>(frame.rows()));
    for (Eigen::Index i = 0; i < frame.rows(); ++i) codes[static_cast<std::size_t>(i)] = frame.categorical(i, j);
    return codes;
}

namespace {

std::vector<int> label_vector(const FeatureFrame& frame) {
    const auto& y = frame.labels();
    return {y.data(), y.data() + y.size()};
}

}  // namespace

TargetEncoder fit_target_encoder(const FeatureFrame& train, const std::string& column,
                                 const TargetEncoderParams& params) {
    const auto codes = column_codes(train, column);
    const auto labels = label_vector(train);
    return TargetEncoder(codes, labels, params);
}

Eigen::VectorXd out_of_fold_target_encoding(std::span<const std::int32_t> codes, std::span<const int> labels,
                                            std::span<const int> folds, const TargetEncoderParams& params) {
    if (codes.size() != labels.size() || codes.size() != folds.size()) {
        throw ShapeError("out-of-fold encoding: codes, labels and folds differ in length");
    }
    int k = 0;
    for (int f : folds) k = std::max(k, f + 1);
    Eigen::VectorXd out(static_cast<Eigen::Index>(codes.size()));
    std::vector<std::int32_t> fit_codes;
    std::vector<int> fit_labels;
    for (int f = 0; f < k; ++f) {
        fit_codes.clear();
        fit_labels.clear();
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (folds[i] == f) continue;
            fit_codes.push_back(codes[i]);
            fit_labels.push_back(labels[i]);
        }
        const TargetEncoder encoder(fit_codes, fit_labels, params, f);
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (folds[i] == f) out(static_cast<Eigen::Index>(i)) = encoder.value(codes[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frequency ratios

FrequencyEncoder::FrequencyEncoder(std::span<const std::int32_t> codes) {
    for (auto c : codes) {
        if (c < 0) continue;
        if (static_cast<std::size_t>(c) >= counts_.size()) counts_.resize(static_cast<std::size_t>(c) + 1, 0.0);
        counts_[static_cast<std::size_t>(c)] += 1.0;
    }
    total_ = static_cast<double>(codes.size());
    for (double c : counts_) max_count_ = std::max(max_count_, c);
}

double FrequencyEncoder::frequency(std::int32_t code) const {
    if (code <= kUnknownCode || static_cast<std::size_t>(code) >= counts_.size() || total_ == 0.0) return 0.0;
    return counts_[static_cast<std::size_t>(code)] / total_;
}

double FrequencyEncoder::dominance(std::int32_t code) const {
    if (code <= kUnknownCode || static_cast<std::size_t>(code) >= counts_.size() || max_count_ == 0.0) return 0.0;
    return counts_[static_cast<std::size_t>(code)] / max_count_;
}

Eigen::MatrixXd FrequencyEncoder::transform(std::span<const std::int32_t> codes) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(codes.size()), 2);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out(static_cast<Eigen::Index>(i), 0) = frequency(codes[i]);
        out(static_cast<Eigen::Index>(i), 1) = dominance(codes[i]);
    }
    return out;
}

FrequencyEncoder frequency_ratios(const FeatureFrame& train, const std::string& column) {
    return FrequencyEncoder(column_codes(train, column));
}

// ---------------------------------------------------------------------------
// Cardinality routing

std::string_view to_string(CategoricalRoute route) {
    switch (route) {
        case CategoricalRoute::OneHot: return "one_hot";
        case CategoricalRoute::Ordinal: return "ordinal";
        case CategoricalRoute::Target: return "target";
    }
    return "unknown";
}

std::vector<std::string> CategoricalEncoding::output_names() const {
    switch (route) {
        case CategoricalRoute::OneHot: {
            std::vector<std::string> names;
            for (const auto& token : one_hot_tokens) names.push_back(column + "=" + token);
            return names;
        }
        case CategoricalRoute::Ordinal: return {column + "_ord"};
        case CategoricalRoute::Target: return {column + "_te"};
    }
    return {};
}

Eigen::MatrixXd CategoricalEncoding::transform(std::span<const std::int32_t> codes) const {
    const auto n = static_cast<Eigen::Index>(codes.size());
    switch (route) {
        case CategoricalRoute::OneHot: {
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(one_hot_codes.size()));
            for (Eigen::Index i = 0; i < n; ++i) {
                auto it = std::find(one_hot_codes.begin(), one_hot_codes.end(), codes[static_cast<std::size_t>(i)]);
                if (it != one_hot_codes.end()) out(i, it - one_hot_codes.begin()) = 1.0;
            }
            return out;
        }
        case CategoricalRoute::Ordinal: {
            Eigen::MatrixXd out(n, 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto c = codes[static_cast<std::size_t>(i)];
                const int rank = c >= 0 && static_cast<std::size_t>(c) < ordinal_rank.size()
                                     ? ordinal_rank[static_cast<std::size_t>(c)]
                                     : -1;
                out(i, 0) = rank >= 0 ? rank : cardinality;
            }
            return out;
        }
        case CategoricalRoute::Target: return target.encode(codes);
    }
    return {};
}

CategoricalEncoding fit_categorical_encoding(const FeatureFrame& train, const std::string& column,
                                             const CardinalityThresholds& thresholds,
                                             const TargetEncoderParams& target_params) {
    CategoricalEncoding enc;
    enc.column = column;
    const auto codes = column_codes(train, column);
    std::map<std::int32_t, int> counts;
    for (auto c : codes) {
        if (c >= 0) ++counts[c];
    }
    enc.cardinality = static_cast<int>(counts.size());
    if (enc.cardinality < thresholds.one_hot_below) {
        enc.route = CategoricalRoute::OneHot;
        const auto& vocab = train.vocabularies[static_cast<std::size_t>(train.categorical_index(column))];
        for (const auto& [code, n] : counts) {
            enc.one_hot_codes.push_back(code);
            enc.one_hot_tokens.push_back(vocab.token(code));
        }
    } else if (enc.cardinality <= thresholds.ordinal_up_to) {
        enc.route = CategoricalRoute::Ordinal;
        std::vector<std::pair<std::int32_t, int>> by_freq(counts.begin(), counts.end());
        std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        const std::int32_t max_code = counts.empty() ? -1 : counts.rbegin()->first;
        enc.ordinal_rank.assign(static_cast<std::size_t>(max_code + 1), -1);
        for (std::size_t r = 0; r < by_freq.size(); ++r) {
            enc.ordinal_rank[static_cast<std::size_t>(by_freq[r].first)] = static_cast<int>(r);
        }
    } else {
        enc.route = CategoricalRoute::Target;
        enc.target = fit_target_encoder(train, column, target_params);
    }
    return enc;
}

}  // namespace hydra
