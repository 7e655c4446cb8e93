#include "hydra/features.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "hydra/gbdt.hpp"
#include "hydra/random.hpp"

namespace hydra {

void FeatureOptions::validate() const {
    window.validate();
    if (te_folds < 2) throw ConfigError("features.te_folds must be at least 2");
    if (!(te_strength >= 0.0) || !(te_noise >= 0.0)) throw ConfigError("target encoding strength and noise must be non-negative");
    if (!(psi_threshold > 0.0) || psi_bins < 2) throw ConfigError("PSI screen needs a positive threshold and >= 2 bins");
    if (drift_period_weeks < 1) throw ConfigError("features.drift_period_weeks must be positive");
    if (!(autocross_holdout_fraction > 0.0 && autocross_holdout_fraction < 1.0)) {
        throw ConfigError("features.autocross_holdout_fraction must lie in (0, 1)");
    }
    if (!(spectral_variance_quantile >= 0.0 && spectral_variance_quantile <= 1.0)) {
        throw ConfigError("spectro.variance_quantile must lie in [0, 1]");
    }
    if (!(dense_clip > 0.0)) throw ConfigError("features.dense_clip must be positive");
    if (graph) gat.validate();
    if (autocross) autocross_config.validate();
}

namespace {

struct Block {
    std::string name;
    std::vector<std::string> columns;
    Eigen::MatrixXd out_of_fold;
    Eigen::MatrixXd ordered;  // empty when identical to out_of_fold
};

Eigen::MatrixXd take_columns(const FeatureFrame& frame, const std::vector<std::string>& names) {
    Eigen::MatrixXd out(frame.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = frame.numeric.col(frame.numeric_index(names[k]));
    return out;
}

/// Robust scaling fitted on the fitting rows, applied to every row.
Eigen::MatrixXd scale_on(const Eigen::MatrixXd& values, std::span<const Eigen::Index> fit_rows) {
    if (values.cols() == 0) return values;
    const Eigen::MatrixXd fit = values(std::vector<Eigen::Index>(fit_rows.begin(), fit_rows.end()), Eigen::all);
    return fit_robust_scaler(fit).transform(values);
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return !prefix.empty() && s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

FeaturePipeline FeaturePipeline::fit(const FeatureFrame& frame, std::span<const Eigen::Index> fit_rows,
                                     std::span<const Eigen::Index> fit_validation_rows, const FeatureOptions& options,
                                     std::uint64_t seed) {
    options.validate();
    if (fit_rows.empty()) throw DataError("feature pipeline: no fitting rows");
    const Eigen::VectorXi& labels = frame.labels();
    const std::vector<Eigen::Index> fit(fit_rows.begin(), fit_rows.end());
    const Eigen::VectorXi fit_labels = labels(fit);
    const double base_rate = fit_labels.cast<double>().mean();

    FeaturePipeline p;
    p.dense_clip_ = options.dense_clip;
    std::vector<Block> blocks;

    std::vector<std::string> base, series;
    for (const auto& name : frame.numeric_names()) (starts_with(name, options.series_prefix) ? series : base).push_back(name);

    // missing values
    const auto imputer = fit_imputer(select_rows(frame, fit));
    FeatureFrame imputed = apply_imputer(imputer, frame);
    std::vector<std::string> indicators;
    for (const auto& col : imputer.indicator_columns) {
        if (std::find(base.begin(), base.end(), col) != base.end()) indicators.push_back(missing_indicator_name(col));
    }

    // population stability over the fitting weeks
    std::set<std::string> rebinned;
    std::set<int> fit_weeks;
    for (auto r : fit) fit_weeks.insert(frame.week(r));
    if (options.psi_screen && fit_weeks.size() >= 2 && !base.empty()) {
        p.psi_ = screen_features(select_rows(imputed, fit), options.psi_threshold, options.psi_bins, base);
        imputed = apply_psi_report(p.psi_, std::move(imputed));
        for (const auto& e : p.psi_.entries) {
            if (e.action == PsiAction::Drop) base.erase(std::find(base.begin(), base.end(), e.feature));
            if (e.action == PsiAction::Rebin) rebinned.insert(e.feature);
        }
    }

    // base block: per-period normalization, then robust scaling
    Eigen::MatrixXd base_values = take_columns(imputed, base);
    if (options.drift_normalize) {
        std::vector<std::string> continuous;
        std::vector<Eigen::Index> idx;
        for (std::size_t k = 0; k < base.size(); ++k) {
            if (!rebinned.count(base[k])) {
                continuous.push_back(base[k]);
                idx.push_back(static_cast<Eigen::Index>(k));
            }
        }
        if (!idx.empty()) {
            const Eigen::MatrixXd cont = base_values(Eigen::all, idx);
            const auto normalizer = fit_drift_normalizer(cont, frame.week, continuous, options.drift_period_weeks);
            base_values(Eigen::all, idx) = apply_drift_normalizer(normalizer, cont, frame.week);
        }
    }
    base_values = scale_on(base_values, fit);
    blocks.push_back({"base", base, base_values, {}});
    if (!indicators.empty()) blocks.push_back({"missing", indicators, take_columns(imputed, indicators), {}});

    // weekly series
    if (!series.empty()) {
        const Eigen::MatrixXd s = take_columns(imputed, series);
        blocks.push_back({"rolling", summary_feature_names("hist", options.window),
                          scale_on(summarize_series(s, options.window), fit), {}});
        if (options.spectro) {
            SpectralConfig cfg = SpectralConfig::defaults(static_cast<int>(series.size()));
            cfg.family = options.wavelet;
            if (!options.wavelet_scales.empty()) cfg.scales = options.wavelet_scales;
            if (!options.frequencies.empty()) cfg.frequencies = options.frequencies;
            cfg.variance_quantile = options.spectral_variance_quantile;
            const Eigen::MatrixXd spectral = spectral_features(s, cfg);
            const auto all_names = spectral_feature_names(cfg);
            const auto keep = variance_filter(spectral(fit, Eigen::all), cfg.variance_quantile);
            std::vector<std::string> kept_names;
            for (auto j : keep) kept_names.push_back(all_names[static_cast<std::size_t>(j)]);
            blocks.push_back({"spectral", kept_names, scale_on(spectral(Eigen::all, keep), fit), {}});
        }
    }

    // categorical encodings; key columns only shape the graph
    const auto& keys = options.graph_options.key_columns.empty() ? frame.schema.key_columns : options.graph_options.key_columns;
    const FeatureFrame fit_frame = select_rows(imputed, fit);
    std::unordered_map<Eigen::Index, std::size_t> fit_position;
    for (std::size_t k = 0; k < fit.size(); ++k) fit_position.emplace(fit[k], k);
    std::vector<int> te_folds(fit.size());
    {
        Rng rng(mix64(seed, 0x7e));
        const auto perm = rng.permutation(fit.size());
        for (std::size_t k = 0; k < perm.size(); ++k) te_folds[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(options.te_folds));
    }
    Block cat{"categorical", {}, Eigen::MatrixXd(frame.rows(), 0), Eigen::MatrixXd(frame.rows(), 0)};
    std::vector<std::string> te_columns;
    const auto cat_names = frame.categorical_names();
    for (std::size_t c = 0; c < cat_names.size(); ++c) {
        const auto& col = cat_names[c];
        if (std::find(keys.begin(), keys.end(), col) != keys.end()) continue;
        TargetEncoderParams te{base_rate, options.te_strength, options.te_noise, mix64(seed, 0x7e00 + c)};
        const auto enc = fit_categorical_encoding(fit_frame, col, options.thresholds, te);
        const auto codes = column_codes(imputed, col);
        Eigen::MatrixXd oof = enc.transform(codes);
        Eigen::MatrixXd ord = oof;
        if (enc.route == CategoricalRoute::Target) {
            const auto fit_codes = column_codes(fit_frame, col);
            const std::vector<int> fit_y(fit_labels.data(), fit_labels.data() + fit_labels.size());
            const Eigen::VectorXd oof_fit = out_of_fold_target_encoding(fit_codes, fit_y, te_folds, te);
            const Eigen::VectorXd ord_fit =
                ordered_target_statistics(fit_codes, fit_y, mix64(seed, 0x0d00 + c), base_rate, std::max(options.te_strength, 1e-12));
            for (std::size_t k = 0; k < fit.size(); ++k) {
                oof(fit[k], 0) = oof_fit(static_cast<Eigen::Index>(k));
                ord(fit[k], 0) = ord_fit(static_cast<Eigen::Index>(k));
            }
            te_columns.push_back(enc.output_names().front());
        }
        const FrequencyEncoder freq(column_codes(fit_frame, col));
        const Eigen::MatrixXd fr = freq.transform(codes);
        auto append = [&](Eigen::MatrixXd& dst, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
            Eigen::MatrixXd next(frame.rows(), dst.cols() + a.cols() + b.cols());
            next << dst, a, b;
            dst = std::move(next);
        };
        append(cat.out_of_fold, oof, fr);
        append(cat.ordered, ord, fr);
        for (auto& n : enc.output_names()) cat.columns.push_back(n);
        cat.columns.push_back(col + "_frequency");
        cat.columns.push_back(col + "_dominance");
    }
    if (!cat.columns.empty()) blocks.push_back(cat);

    // relational embeddings
    if (options.graph) {
        GraphOptions g = options.graph_options;
        g.causal = true;
        g.seed = mix64(seed, 0x96 + g.seed);
        const ClientGraph graph = build_graph(frame, base_values, g);
        std::vector<Eigen::Index> nodes(fit);
        nodes.insert(nodes.end(), fit_validation_rows.begin(), fit_validation_rows.end());
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        const ClientGraph sub = induced_subgraph(graph, nodes);
        std::vector<bool> train_mask(nodes.size(), false), val_mask(nodes.size(), false);
        for (std::size_t k = 0; k < nodes.size(); ++k) (fit_position.count(nodes[k]) ? train_mask : val_mask)[k] = true;
        GatConfig gat = options.gat;
        gat.seed = mix64(seed, 0x9a7 + gat.seed);
        GatTrainLog log;
        const GatModel model = gat_train(sub, labels(nodes), train_mask, val_mask, gat, &log);
        p.gat_log_ = std::move(log);
        blocks.push_back({"graph", embedding_feature_names(model), scale_on(embed(model, graph), fit), {}});
    }

    // cross features over base and target-encoded columns
    if (options.autocross) {
        std::vector<std::string> pool_names = base;
        Eigen::MatrixXd pool_oof = base_values, pool_ord = base_values;
        for (const auto& name : te_columns) {
            const auto j = static_cast<Eigen::Index>(std::find(cat.columns.begin(), cat.columns.end(), name) - cat.columns.begin());
            pool_names.push_back(name);
            pool_oof.conservativeResize(Eigen::NoChange, pool_oof.cols() + 1);
            pool_oof.col(pool_oof.cols() - 1) = cat.out_of_fold.col(j);
            pool_ord.conservativeResize(Eigen::NoChange, pool_ord.cols() + 1);
            pool_ord.col(pool_ord.cols() - 1) = cat.ordered.col(j);
        }
        if (pool_names.size() >= 2) {
            AutoCrossConfig ac = options.autocross_config;
            ac.seed = mix64(seed, 0xac + ac.seed);
            Rng rng(mix64(seed, 0xac5));
            auto order = rng.permutation(fit.size());
            const auto n_hold = static_cast<std::size_t>(std::lround(options.autocross_holdout_fraction * static_cast<double>(fit.size())));
            std::vector<Eigen::Index> hold, train;
            for (std::size_t k = 0; k < order.size(); ++k) (k < n_hold ? hold : train).push_back(fit[order[k]]);
            std::sort(hold.begin(), hold.end());
            std::sort(train.begin(), train.end());
            auto ledger = run_autocross(make_pool(pool_names, pool_oof(train, Eigen::all)), labels(train),
                                        make_pool(pool_names, pool_oof(hold, Eigen::all)), labels(hold), ac);
            const auto gains = cross_importance(ledger, make_pool(pool_names, pool_oof(fit, Eigen::all)), fit_labels, ac);
            ledger = prune(std::move(ledger), gains, ac.prune_floor);
            const auto survivors = ledger.surviving_names();
            if (!survivors.empty()) {
                const auto n = static_cast<Eigen::Index>(survivors.size());
                const Eigen::MatrixXd oof = apply_ledger(ledger, make_pool(pool_names, pool_oof)).values.rightCols(n);
                const Eigen::MatrixXd ord = apply_ledger(ledger, make_pool(pool_names, pool_ord)).values.rightCols(n);
                const auto scaler = fit_robust_scaler(Eigen::MatrixXd(oof(fit, Eigen::all)));
                blocks.push_back({"autocross", survivors, scaler.transform(oof), scaler.transform(ord)});
            }
            p.ledger_ = std::move(ledger);
        }
    }

    Eigen::Index width = 0;
    for (const auto& b : blocks) width += b.out_of_fold.cols();
    p.out_of_fold_.resize(frame.rows(), width);
    p.ordered_.resize(frame.rows(), width);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        const Eigen::Index w = b.out_of_fold.cols();
        p.out_of_fold_.middleCols(at, w) = b.out_of_fold;
        p.ordered_.middleCols(at, w) = b.ordered.size() ? b.ordered : b.out_of_fold;
        at += w;
        p.names_.insert(p.names_.end(), b.columns.begin(), b.columns.end());
        p.block_names_.push_back(b.name);
        p.block_sizes_.push_back(w);
    }
    return p;
}

Eigen::MatrixXd FeaturePipeline::rows(std::span<const Eigen::Index> rows, TargetMode mode) const {
    const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    return (mode == TargetMode::Ordered ? ordered_ : out_of_fold_)(idx, Eigen::all);
}

Eigen::MatrixXd FeaturePipeline::dense_rows(std::span<const Eigen::Index> rows) const {
    const double c = dense_clip_;
    return this->rows(rows, TargetMode::OutOfFold).unaryExpr([c](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, -c, c); });
}

}  // namespace hydra
