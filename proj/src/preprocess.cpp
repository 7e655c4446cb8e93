#include "hydra/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hydra/random.hpp"

namespace hydra {

// ---------------------------------------------------------------------------
// Folds

namespace {

struct GroupStat {
    int id = 0;
    std::vector<Eigen::Index> rows;
    double positives = 0.0;
};

struct FoldTally {
    double rows = 0.0;
    double positives = 0.0;

    double bias(double mu) const { return rows > 0.0 ? std::abs(positives / rows - mu) : 0.0; }
};

}  // namespace

FoldPlan build_folds(const FeatureFrame& frame, int k, double epsilon, std::uint64_t seed) {
    if (k < 2) throw ConfigError("build_folds: K must be at least 2, got " + std::to_string(k));
    const auto& y = frame.labels();
    const Eigen::Index n = frame.rows();
    if (n == 0) throw FoldError("build_folds: frame is empty", 0);

    std::map<int, GroupStat> by_id;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& g = by_id[frame.group(i)];
        g.id = frame.group(i);
        g.rows.push_back(i);
        g.positives += y(i);
    }
    std::vector<GroupStat> groups;
    groups.reserve(by_id.size());
    for (auto& [id, g] : by_id) groups.push_back(std::move(g));

    Rng rng(seed);
    rng.shuffle(groups);
    std::stable_sort(groups.begin(), groups.end(),
                     [](const GroupStat& a, const GroupStat& b) { return a.rows.size() > b.rows.size(); });

    const double mu = y.cast<double>().mean();
    const double target = static_cast<double>(n) / k;
    std::vector<FoldTally> tally(static_cast<std::size_t>(k));
    std::vector<int> group_fold(groups.size(), 0);

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const auto size = static_cast<double>(g.rows.size());
        bool any_open = std::any_of(tally.begin(), tally.end(), [&](const FoldTally& t) { return t.rows < target; });
        int best = -1;
        double best_bias = 0.0;
        for (int f = 0; f < k; ++f) {
            const auto& t = tally[static_cast<std::size_t>(f)];
            if (any_open && t.rows >= target) continue;
            const FoldTally after{t.rows + size, t.positives + g.positives};
            const double b = after.bias(mu);
            if (best < 0 || b < best_bias ||
                (b == best_bias && t.rows < tally[static_cast<std::size_t>(best)].rows)) {
                best = f;
                best_bias = b;
            }
        }
        group_fold[gi] = best;
        tally[static_cast<std::size_t>(best)].rows += size;
        tally[static_cast<std::size_t>(best)].positives += g.positives;
    }

    // Local search: move or swap groups out of the worst fold while that
    // strictly lowers the larger of the two affected biases.
    const double lo_size = 0.5 * target, hi_size = 1.5 * target;
    for (int pass = 0; pass < 500; ++pass) {
        int worst = 0;
        for (int f = 1; f < k; ++f) {
            if (tally[static_cast<std::size_t>(f)].bias(mu) > tally[static_cast<std::size_t>(worst)].bias(mu)) worst = f;
        }
        const double current = tally[static_cast<std::size_t>(worst)].bias(mu);
        if (current == 0.0) break;
        double best_score = current;
        std::ptrdiff_t best_a = -1, best_b = -1;
        int best_f = -1;
        for (std::size_t a = 0; a < groups.size(); ++a) {
            if (group_fold[a] != worst) continue;
            const double sa = static_cast<double>(groups[a].rows.size()), pa = groups[a].positives;
            for (int f = 0; f < k; ++f) {
                if (f == worst) continue;
                const auto& tw = tally[static_cast<std::size_t>(worst)];
                const auto& tf = tally[static_cast<std::size_t>(f)];
                // plain move of a into f
                {
                    const FoldTally w2{tw.rows - sa, tw.positives - pa}, f2{tf.rows + sa, tf.positives + pa};
                    if (w2.rows >= lo_size && f2.rows <= hi_size) {
                        const double score = std::max(w2.bias(mu), f2.bias(mu));
                        if (score < best_score) {
                            best_score = score;
                            best_a = static_cast<std::ptrdiff_t>(a);
                            best_b = -1;
                            best_f = f;
                        }
                    }
                }
                for (std::size_t b = 0; b < groups.size(); ++b) {
                    if (group_fold[b] != f) continue;
                    const double sb = static_cast<double>(groups[b].rows.size()), pb = groups[b].positives;
                    const FoldTally w2{tw.rows - sa + sb, tw.positives - pa + pb};
                    const FoldTally f2{tf.rows + sa - sb, tf.positives + pa - pb};
                    if (w2.rows < lo_size || w2.rows > hi_size || f2.rows < lo_size || f2.rows > hi_size) continue;
                    const double score = std::max(w2.bias(mu), f2.bias(mu));
                    if (score < best_score) {
                        best_score = score;
                        best_a = static_cast<std::ptrdiff_t>(a);
                        best_b = static_cast<std::ptrdiff_t>(b);
                        best_f = f;
                    }
                }
            }
        }
        if (best_a < 0) break;
        auto move = [&](std::size_t g, int from, int to) {
            const double s = static_cast<double>(groups[g].rows.size()), p = groups[g].positives;
            tally[static_cast<std::size_t>(from)].rows -= s;
            tally[static_cast<std::size_t>(from)].positives -= p;
            tally[static_cast<std::size_t>(to)].rows += s;
            tally[static_cast<std::size_t>(to)].positives += p;
            group_fold[g] = to;
        };
        move(static_cast<std::size_t>(best_a), worst, best_f);
        if (best_b >= 0) move(static_cast<std::size_t>(best_b), best_f, worst);
    }

    FoldPlan plan;
    plan.k = k;
    plan.epsilon = epsilon;
    plan.global_rate = mu;
    plan.assignment.assign(static_cast<std::size_t>(n), 0);
    plan.fold_rows.resize(static_cast<std::size_t>(k));
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        for (auto r : groups[gi].rows) {
            plan.assignment[static_cast<std::size_t>(r)] = group_fold[gi];
            plan.fold_rows[static_cast<std::size_t>(group_fold[gi])].push_back(r);
        }
    }
    for (int f = 0; f < k; ++f) {
        auto& rows = plan.fold_rows[static_cast<std::size_t>(f)];
        std::sort(rows.begin(), rows.end(), [&](auto a, auto b) {
            return frame.week(a) != frame.week(b) ? frame.week(a) < frame.week(b) : a < b;
        });
        if (rows.empty()) throw FoldError("fold construction infeasible: fold " + std::to_string(f) + " is empty", f);
        plan.fold_bias.push_back(tally[static_cast<std::size_t>(f)].bias(mu));
    }
    for (int f = 0; f < k; ++f) {
        if (plan.fold_bias[static_cast<std::size_t>(f)] >= epsilon) {
            throw FoldError("fold construction infeasible: fold " + std::to_string(f) + " has bias " +
                                std::to_string(plan.fold_bias[static_cast<std::size_t>(f)]) + " >= epsilon " +
                                std::to_string(epsilon),
                            f);
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Missing values

std::string missing_indicator_name(const std::string& column) { return column + "_missing"; }

ImputationModel fit_imputer(const FeatureFrame& train) {
    ImputationModel model;
    model.numeric_columns = train.numeric_names();
    model.categorical_columns = train.categorical_names();
    const Eigen::Index n = train.rows();
    const Eigen::Index n_num = train.numeric.cols();

    model.numeric_fill.resize(n_num);
    for (Eigen::Index j = 0; j < n_num; ++j) {
        std::vector<double> observed;
        observed.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!train.missing(i, j)) observed.push_back(train.numeric(i, j));
        }
        const auto& name = model.numeric_columns[static_cast<std::size_t>(j)];
        if (observed.empty() && n > 0) throw DataError("cannot impute column \"" + name + "\": all values missing");
        const auto n_observed = static_cast<Eigen::Index>(observed.size());
        model.numeric_fill(j) = observed.empty() ? 0.0 : quantile(std::move(observed), 0.5);
        if (n_observed < n) model.indicator_columns.push_back(name);
    }
    for (Eigen::Index j = 0; j < train.categorical.cols(); ++j) {
        std::map<std::int32_t, Eigen::Index> counts;
        Eigen::Index observed = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (train.missing(i, n_num + j)) continue;
            ++counts[train.categorical(i, j)];
            ++observed;
        }
        const auto& name = model.categorical_columns[static_cast<std::size_t>(j)];
        if (observed == 0 && n > 0) throw DataError("cannot impute column \"" + name + "\": all values missing");
        std::int32_t mode = kUnknownCode;
        Eigen::Index best = -1;
        for (const auto& [code, c] : counts) {
            if (c > best) {
                best = c;
                mode = code;
            }
        }
        model.categorical_fill.push_back(mode);
        if (observed < n) model.indicator_columns.push_back(name);
    }
    return model;
}

FeatureFrame apply_imputer(const ImputationModel& model, FeatureFrame frame) {
    const Eigen::Index n = frame.rows();
    const Eigen::Index n_num = frame.numeric.cols();
    std::vector<std::pair<std::string, Eigen::VectorXd>> indicators;
    auto wants_indicator = [&](const std::string& name) {
        return std::find(model.indicator_columns.begin(), model.indicator_columns.end(), name) !=
               model.indicator_columns.end();
    };
    for (std::size_t c = 0; c < model.numeric_columns.size(); ++c) {
        const auto& name = model.numeric_columns[c];
        const Eigen::Index j = frame.numeric_index(name);
        Eigen::VectorXd flag = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (frame.missing(i, j)) {
                frame.numeric(i, j) = model.numeric_fill(static_cast<Eigen::Index>(c));
                flag(i) = 1.0;
            }
        }
        if (wants_indicator(name)) indicators.emplace_back(missing_indicator_name(name), std::move(flag));
    }
    for (std::size_t c = 0; c < model.categorical_columns.size(); ++c) {
        const auto& name = model.categorical_columns[c];
        const Eigen::Index j = frame.categorical_index(name);
        Eigen::VectorXd flag = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (frame.missing(i, n_num + j)) {
                frame.categorical(i, j) = model.categorical_fill[c];
                flag(i) = 1.0;
            }
        }
        if (wants_indicator(name)) indicators.emplace_back(missing_indicator_name(name), std::move(flag));
    }
    frame.refresh_missing_mask();
    for (auto& [name, flag] : indicators) frame.add_numeric_column(name, flag);
    return frame;
}

// ---------------------------------------------------------------------------
// Per-period drift normalization

DriftNormalizer fit_drift_normalizer(const Eigen::MatrixXd& values, const Eigen::VectorXi& weeks,
                                     std::vector<std::string> columns, int period_weeks) {
    if (period_weeks < 1) throw ConfigError("drift normalizer: period length must be positive");
    if (values.rows() != weeks.size()) throw ShapeError("drift normalizer: rows and weeks differ");
    if (columns.empty()) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) columns.push_back("c" + std::to_string(j));
    }
    if (static_cast<Eigen::Index>(columns.size()) != values.cols()) {
        throw ShapeError("drift normalizer: column names do not match matrix width");
    }
    DriftNormalizer model;
    model.period_weeks = period_weeks;
    model.columns = std::move(columns);

    std::map<int, std::vector<Eigen::Index>> rows_by_period;
    for (Eigen::Index i = 0; i < weeks.size(); ++i) rows_by_period[model.period_of(weeks(i))].push_back(i);

    for (const auto& [period, rows] : rows_by_period) {
        std::vector<PeriodStats> stats(static_cast<std::size_t>(values.cols()));
        bool fitted = true;
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            double sum = 0.0, count = 0.0;
            for (auto r : rows) {
                if (std::isnan(values(r, j))) continue;
                sum += values(r, j);
                count += 1.0;
            }
            if (count < 2.0) {
                fitted = false;
                break;
            }
            const double mean = sum / count;
            double ss = 0.0;
            for (auto r : rows) {
                if (!std::isnan(values(r, j))) ss += (values(r, j) - mean) * (values(r, j) - mean);
            }
            stats[static_cast<std::size_t>(j)] = {mean, std::max(std::sqrt(ss / count), kScaleFloor)};
        }
        if (fitted) model.periods.emplace(period, std::move(stats));
    }
    return model;
}

Eigen::MatrixXd apply_drift_normalizer(const DriftNormalizer& normalizer, const Eigen::MatrixXd& values,
                                       const Eigen::VectorXi& weeks, DriftReport* report) {
    if (values.cols() != static_cast<Eigen::Index>(normalizer.columns.size())) {
        throw ShapeError("drift normalizer: matrix width does not match fitted columns");
    }
    if (normalizer.periods.empty()) throw DataError("drift normalizer has no fitted period");
    Eigen::MatrixXd out = values;
    std::map<int, const std::vector<PeriodStats>*> resolved;
    auto lookup = [&](int period) -> const std::vector<PeriodStats>& {
        if (auto it = resolved.find(period); it != resolved.end()) return *it->second;
        auto exact = normalizer.periods.find(period);
        const std::vector<PeriodStats>* stats = nullptr;
        if (exact != normalizer.periods.end()) {
            stats = &exact->second;
        } else {
            // nearest fitted period, earlier one on ties
            auto after = normalizer.periods.lower_bound(period);
            auto chosen = after;
            if (after == normalizer.periods.end() ||
                (after != normalizer.periods.begin() && period - std::prev(after)->first <= after->first - period)) {
                chosen = std::prev(after);
            }
            stats = &chosen->second;
            if (report) {
                report->fallbacks.push_back("period " + std::to_string(period) + " uses statistics of period " +
                                            std::to_string(chosen->first));
            }
        }
        resolved.emplace(period, stats);
        return *stats;
    };
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        const auto& stats = lookup(normalizer.period_of(weeks(i)));
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const auto& s = stats[static_cast<std::size_t>(j)];
            out(i, j) = (values(i, j) - s.mean) / s.stddev;
        }
    }
    return out;
}

DriftNormalizer fit_drift_normalizer(const FeatureFrame& frame, int period_weeks, std::vector<std::string> columns) {
    if (columns.empty()) columns = frame.numeric_names();
    std::vector<Eigen::Index> idx;
    for (const auto& c : columns) idx.push_back(frame.numeric_index(c));
    return fit_drift_normalizer(frame.numeric(Eigen::all, idx), frame.week, std::move(columns), period_weeks);
}

FeatureFrame apply_drift_normalizer(const DriftNormalizer& normalizer, FeatureFrame frame, DriftReport* report) {
    std::vector<Eigen::Index> idx;
    for (const auto& c : normalizer.columns) idx.push_back(frame.numeric_index(c));
    const Eigen::MatrixXd normalized =
        apply_drift_normalizer(normalizer, frame.numeric(Eigen::all, idx), frame.week, report);
    frame.numeric(Eigen::all, idx) = normalized;
    return frame;
}

// ---------------------------------------------------------------------------
// Population stability

namespace {

std::vector<double> observed_sorted(std::span<const double> values) {
    std::vector<double> v;
    v.reserve(values.size());
    for (double x : values) {
        if (!std::isnan(x)) v.push_back(x);
    }
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::vector<double> quantile_bin_edges(std::span<const double> reference, int n_bins) {
    if (n_bins < 2) throw ConfigError("PSI needs at least 2 bins, got " + std::to_string(n_bins));
    const auto sorted = observed_sorted(reference);
    if (sorted.empty()) throw DataError("PSI reference has no observed values");
    std::vector<double> edges;
    for (int b = 1; b < n_bins; ++b) edges.push_back(quantile_sorted(sorted, static_cast<double>(b) / n_bins));
    return edges;
}

std::vector<double> bin_counts(std::span<const double> values, std::span<const double> edges) {
    std::vector<double> counts(edges.size() + 1, 0.0);
    for (double v : values) {
        if (std::isnan(v)) continue;
        const auto b = std::lower_bound(edges.begin(), edges.end(), v) - edges.begin();
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return counts;
}

namespace {

double psi_on_edges(std::span<const double> reference, std::span<const double> comparison,
                    std::span<const double> edges, double smoothing) {
    const auto ref = bin_counts(reference, edges);
    const auto cmp = bin_counts(comparison, edges);
    const double bins = static_cast<double>(ref.size());
    const double ref_total = std::accumulate(ref.begin(), ref.end(), 0.0) + smoothing * bins;
    const double cmp_total = std::accumulate(cmp.begin(), cmp.end(), 0.0) + smoothing * bins;
    double total = 0.0;
    for (std::size_t b = 0; b < ref.size(); ++b) {
        const double p = (ref[b] + smoothing) / ref_total;
        const double q = (cmp[b] + smoothing) / cmp_total;
        if (p == q) continue;
        total += (p - q) * std::log(p / q);
    }
    return total;
}

}  // namespace

double psi(std::span<const double> reference, std::span<const double> comparison, int n_bins, double smoothing) {
    if (n_bins < 2) throw ConfigError("PSI needs at least 2 bins, got " + std::to_string(n_bins));
    if (reference.empty() || comparison.empty()) throw DataError("PSI needs non-empty samples");
    const auto edges = quantile_bin_edges(reference, n_bins);
    return psi_on_edges(reference, comparison, edges, smoothing);
}

std::string_view to_string(PsiAction action) {
    switch (action) {
        case PsiAction::Keep: return "keep";
        case PsiAction::Rebin: return "rebin";
        case PsiAction::Drop: return "drop";
    }
    return "unknown";
}

PsiReport screen_features(const FeatureFrame& frame, double threshold, int n_bins, std::vector<std::string> columns) {
    if (frame.rows() == 0) throw DataError("screen_features: empty frame");
    PsiReport report;
    report.threshold = threshold;
    report.reference_week = frame.week.minCoeff();
    report.comparison_week = frame.week.maxCoeff();
    if (report.reference_week == report.comparison_week) {
        throw ConfigError("screen_features needs at least two distinct weeks");
    }
    if (columns.empty()) columns = frame.numeric_names();
    const int coarse_bins = std::max(2, (n_bins + 1) / 2);
    for (const auto& name : columns) {
        const Eigen::Index j = frame.numeric_index(name);
        std::vector<double> ref, cmp;
        for (Eigen::Index i = 0; i < frame.rows(); ++i) {
            if (frame.week(i) == report.reference_week) ref.push_back(frame.numeric(i, j));
            if (frame.week(i) == report.comparison_week) cmp.push_back(frame.numeric(i, j));
        }
        PsiEntry entry;
        entry.feature = name;
        entry.bins = n_bins;
        entry.psi = psi(ref, cmp, n_bins);
        entry.psi_after_rebin = entry.psi;
        if (entry.psi > threshold) {
            entry.edges = quantile_bin_edges(ref, coarse_bins);
            entry.psi_after_rebin = psi_on_edges(ref, cmp, entry.edges, 0.5);
            entry.bins = coarse_bins;
            entry.action = entry.psi_after_rebin <= threshold ? PsiAction::Rebin : PsiAction::Drop;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

FeatureFrame apply_psi_report(const PsiReport& report, FeatureFrame frame) {
    std::vector<std::string> dropped;
    for (const auto& e : report.entries) {
        if (e.action == PsiAction::Drop) {
            dropped.push_back(e.feature);
        } else if (e.action == PsiAction::Rebin) {
            const Eigen::Index j = frame.numeric_index(e.feature);
            for (Eigen::Index i = 0; i < frame.rows(); ++i) {
                const double v = frame.numeric(i, j);
                if (std::isnan(v)) continue;
                frame.numeric(i, j) =
                    static_cast<double>(std::lower_bound(e.edges.begin(), e.edges.end(), v) - e.edges.begin());
            }
        }
    }
    frame.drop_numeric_columns(dropped);
    return frame;
}

// ---------------------------------------------------------------------------
// Robust scaling

RobustScaler fit_robust_scaler(const Eigen::MatrixXd& train, std::vector<std::string> columns) {
    RobustScaler scaler;
    if (columns.empty()) {
        for (Eigen::Index j = 0; j < train.cols(); ++j) columns.push_back("c" + std::to_string(j));
    }
    scaler.columns = std::move(columns);
    scaler.median.resize(train.cols());
    scaler.iqr.resize(train.cols());
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        const auto sorted = observed_sorted(std::span<const double>(train.col(j).data(), static_cast<std::size_t>(train.rows())));
        if (sorted.empty()) {
            scaler.median(j) = 0.0;
            scaler.iqr(j) = 1.0;
            continue;
        }
        scaler.median(j) = quantile_sorted(sorted, 0.5);
        scaler.iqr(j) = std::max(quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25), kScaleFloor);
    }
    return scaler;
}

Eigen::MatrixXd RobustScaler::transform(const Eigen::MatrixXd& values) const {
    if (values.cols() != median.size()) throw ShapeError("robust scaler: matrix width does not match fitted columns");
    return (values.rowwise() - median.transpose()).array().rowwise() / iqr.transpose().array();
}

RobustScaler fit_robust_scaler(const FeatureFrame& train) { return fit_robust_scaler(train.numeric, train.numeric_names()); }

FeatureFrame apply_robust_scaler(const RobustScaler& scaler, FeatureFrame frame) {
    std::vector<Eigen::Index> idx;
    for (const auto& c : scaler.columns) idx.push_back(frame.numeric_index(c));
    const Eigen::MatrixXd scaled = scaler.transform(frame.numeric(Eigen::all, idx));
    frame.numeric(Eigen::all, idx) = scaled;
    return frame;
}

}  // namespace hydra
