#include "hydra/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "hydra/format.hpp"
#include "hydra/random.hpp"

namespace hydra {

std::string_view to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::None: return "none";
        case Ablation::NoGraph: return "no-graph";
        case Ablation::NoAutoCross: return "no-autocross";
        case Ablation::NoSpectro: return "no-spectro";
        case Ablation::UniformGate: return "uniform-gate";
    }
    return "none";
}

Ablation parse_ablation(std::string_view text) {
    for (auto a : kAblations) {
        if (to_string(a) == text) return a;
    }
    throw ConfigError("unknown ablation \"" + std::string(text) +
                      "\" (expected none, no-graph, no-autocross, no-spectro or uniform-gate)");
}

std::string_view variant_label(Ablation ablation) {
    switch (ablation) {
        case Ablation::None: return "Full HYDRA-EI";
        case Ablation::NoGraph: return "w/o Graph Features";
        case Ablation::NoAutoCross: return "w/o AutoCross";
        case Ablation::NoSpectro: return "w/o SpectroTemporal";
        case Ablation::UniformGate: return "Static Ensemble Weights";
    }
    return "";
}

TrainerConfig::TrainerConfig() {
    goss.variant = BoosterVariant::Goss;
    ordered.variant = BoosterVariant::Ordered;
}

void TrainerConfig::validate() const {
    features.validate();
    goss.validate();
    ordered.validate();
    dense.validate();
    if (goss.variant != BoosterVariant::Goss) throw ConfigError("goss.variant must be goss");
    if (ordered.variant != BoosterVariant::Ordered) throw ConfigError("ordered.variant must be ordered");
    if (initial_rounds < 0 || warm_rounds < 0) throw ConfigError("booster round counts must be non-negative");
    if (burn_in_weeks < 1) throw ConfigError("trainer.burn_in_weeks must be at least 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("trainer.validation_fraction must lie in (0, 1)");
    }
    if (!(replay_ratio >= 0.0)) throw ConfigError("trainer.replay_ratio must be non-negative");
    if (buffer_capacity < 0 || !(buffer_multiplier > 0.0)) throw ConfigError("replay buffer size must be positive");
    if (!(gate_prior >= 0.0)) throw ConfigError("gate.prior must be non-negative");
    if (!(temperature > 0.0)) throw ConfigError("gate.temperature must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gate.gamma must be non-negative");
}

TrainerConfig apply_ablation(TrainerConfig config) {
    switch (config.ablation) {
        case Ablation::None: break;
        case Ablation::NoGraph: config.features.graph = false; break;
        case Ablation::NoAutoCross: config.features.autocross = false; break;
        case Ablation::NoSpectro: config.features.spectro = false; break;
        case Ablation::UniformGate: break;
    }
    return config;
}

// ---------------------------------------------------------------- buffer

void ReplayBuffer::offer(std::span<const Eigen::Index> rows, const Eigen::VectorXi& weeks) {
    const auto cap = static_cast<std::uint64_t>(capacity_);
    for (auto r : rows) {
        const Entry e{r, weeks(r)};
        if (seen_ < cap) {
            entries_.push_back(e);
        } else {
            const std::uint64_t j = rng_.index(seen_ + 1);
            if (j < cap) entries_[j] = e;
        }
        ++seen_;
    }
}

std::vector<ReplayBuffer::Entry> ReplayBuffer::sample(std::size_t n, std::uint64_t seed) const {
    if (n >= entries_.size()) return entries_;
    std::vector<std::size_t> idx(entries_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    std::vector<Entry> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(entries_[idx[i]]);
    return out;
}

// ---------------------------------------------------------------- plan

EpochPlan make_plan(const FeatureFrame& frame, double validation_fraction, double replay_ratio, std::uint64_t seed) {
    if (!frame.has_labels()) throw DataError("training requires a label column");
    const Eigen::VectorXi& y = frame.labels();
    std::map<int, std::array<std::vector<Eigen::Index>, 2>> by_week;
    for (Eigen::Index i = 0; i < frame.rows(); ++i) by_week[frame.week(i)][y(i) ? 1 : 0].push_back(i);

    EpochPlan plan;
    plan.replay_ratio = replay_ratio;
    for (auto& [week, strata] : by_week) {
        EpochSlice slice;
        slice.week = week;
        Rng rng(mix64(seed, static_cast<std::uint64_t>(week)));
        for (auto& rows : strata) {
            rng.shuffle(rows);
            const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(rows.size())));
            slice.validation.insert(slice.validation.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
            slice.train.insert(slice.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
        }
        std::sort(slice.train.begin(), slice.train.end());
        std::sort(slice.validation.begin(), slice.validation.end());
        plan.epochs.push_back(std::move(slice));
    }
    return plan;
}

EpochBatch make_epoch_batch(std::span<const Eigen::Index> new_rows, const Eigen::VectorXi& weeks,
                            const ReplayBuffer& buffer, double ratio, std::uint64_t seed) {
    EpochBatch batch;
    batch.rows.assign(new_rows.begin(), new_rows.end());
    for (auto r : new_rows) batch.origin_week.push_back(weeks(r));
    batch.new_rows = new_rows.size();
    batch.requested_replay = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(new_rows.size())));
    for (const auto& e : buffer.sample(batch.requested_replay, seed)) {
        batch.rows.push_back(e.row);
        batch.origin_week.push_back(e.week);
    }
    batch.replay_rows = batch.rows.size() - batch.new_rows;
    return batch;
}

// ---------------------------------------------------------------- state

namespace {

struct Fnv {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ c[i]) * 0x100000001b3ULL;
    }
    void text(const std::string& s) { bytes(s.data(), s.size()); }
    template <typename T>
    void value(T v) { bytes(&v, sizeof v); }
    void vector(const Eigen::VectorXd& v) { bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double)); }
};

}  // namespace

std::uint64_t RunState::fingerprint() const {
    Fnv f;
    f.text(goss.fitted() ? goss.serialize() : "-");
    f.text(ordered.fitted() ? ordered.serialize() : "-");
    f.text(dense ? dense->serialize() : "-");
    f.vector(gate.priors);
    f.vector(gate.losses);
    f.vector(gate.weights);
    f.value(gate.epoch);
    for (const auto& e : gate.events) f.text(e);
    for (const auto& e : buffer.entries()) {
        f.value(e.row);
        f.value(e.week);
    }
    f.value(buffer.seen());
    f.value(epochs_completed);
    for (const auto& m : history) {
        f.value(m.epoch);
        f.value(m.week);
        f.value(static_cast<int>(m.model));
        f.value(m.gini);
        f.value(m.brier);
        f.value(m.log_loss);
    }
    for (const auto& g : gate_history) {
        f.value(g.epoch);
        for (double v : g.losses) f.value(v);
        for (double v : g.weights) f.value(v);
    }
    for (const auto& a : audit) {
        f.value(a.epoch);
        f.value(a.replay_rows);
        f.value(a.buffer_size);
    }
    for (const auto& e : events) f.text(e);
    return f.h;
}

RunContext prepare_run(const FeatureFrame& frame, const TrainerConfig& input) {
    TrainerConfig config = apply_ablation(input);
    config.validate();
    const std::uint64_t s = config.seed;
    config.goss.seed = mix64(s, 0x6055, config.goss.seed);
    config.ordered.seed = mix64(s, 0x0bd3, config.ordered.seed);
    config.dense.seed = mix64(s, 0xde45, config.dense.seed);

    EpochPlan plan = make_plan(frame, config.validation_fraction, config.replay_ratio, mix64(s, 0x91a4));
    if (plan.epochs.empty()) throw DataError("training frame has no rows");

    std::vector<Eigen::Index> fit_rows, fit_validation;
    const int burn_in_end = plan.epochs.front().week + config.burn_in_weeks - 1;
    for (const auto& e : plan.epochs) {
        if (e.week > burn_in_end) break;
        fit_rows.insert(fit_rows.end(), e.train.begin(), e.train.end());
        fit_validation.insert(fit_validation.end(), e.validation.begin(), e.validation.end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(fit_validation.begin(), fit_validation.end());
    FeaturePipeline pipeline = FeaturePipeline::fit(frame, fit_rows, fit_validation, config.features, mix64(s, 0xfea7));
    return RunContext{frame, std::move(pipeline), std::move(plan), std::move(config)};
}

RunState initial_state(const RunContext& context) {
    const auto& c = context.config;
    RunState state;
    state.goss = Booster(c.goss);
    state.ordered = Booster(c.ordered);
    state.gate = GateState::initial(static_cast<Eigen::Index>(kExperts), c.gate_prior, c.temperature, c.gamma,
                                    c.ablation == Ablation::UniformGate);
    Eigen::Index capacity = c.buffer_capacity;
    if (capacity == 0) {
        std::vector<double> sizes;
        for (const auto& e : context.plan.epochs) sizes.push_back(static_cast<double>(e.train.size()));
        capacity = static_cast<Eigen::Index>(std::llround(c.buffer_multiplier * quantile(sizes, 0.5)));
        capacity = std::max<Eigen::Index>(capacity, 1);
    }
    state.buffer = ReplayBuffer(capacity, mix64(c.seed, 0xb0ff));
    return state;
}

namespace {

double safe_gini(const Eigen::VectorXi& y, const Eigen::VectorXd& p, std::vector<std::string>& events, int epoch,
                 ModelId model) {
    try {
        return gini(y, p);
    } catch (const MetricError& e) {
        events.push_back("epoch " + std::to_string(epoch) + ": gini undefined for " + std::string(to_string(model)) + ": " +
                         e.what());
        return std::nan("");
    }
}

}  // namespace

RunState run_epoch(const RunState& input, const RunContext& context, int k, const EpochHook& hook) {
    if (k != input.epochs_completed + 1) {
        throw TrainingError("epoch " + std::to_string(k) + " out of order; next epoch is " +
                            std::to_string(input.epochs_completed + 1));
    }
    if (k < 1 || static_cast<std::size_t>(k) > context.plan.size()) throw TrainingError("epoch " + std::to_string(k) + " not in plan");
    const auto& c = context.config;
    const auto& slice = context.plan.epochs[static_cast<std::size_t>(k - 1)];
    const auto& weeks = context.frame.week;
    const auto& labels = context.frame.labels();
    auto stage = [&](std::string_view name) {
        if (hook) hook(name, k);
    };

    RunState state = input;
    try {
        if (slice.train.empty() || slice.validation.empty()) {
            state.events.push_back("epoch " + std::to_string(k) + " (week " + std::to_string(slice.week) +
                                   "): empty week, skipped");
            state.epochs_completed = k;
            return state;
        }

        stage("batch");
        const EpochBatch batch = make_epoch_batch(slice.train, weeks, state.buffer, context.plan.replay_ratio,
                                                  mix64(c.seed, 0xba7c, static_cast<std::uint64_t>(k)));
        BufferAuditRow audit{k, slice.week, batch.new_rows, batch.replay_rows, batch.requested_replay, state.buffer.size()};
        for (int w : batch.origin_week) audit.max_batch_week = std::max(audit.max_batch_week, w);
        for (const auto& e : state.buffer.entries()) audit.max_buffer_week = std::max(audit.max_buffer_week, e.week);
        for (auto r : batch.rows) {
            if (weeks(r) > slice.week) audit.temporal_ok = false;
        }
        if (audit.max_batch_week > slice.week || (state.buffer.size() && audit.max_buffer_week >= slice.week)) {
            audit.temporal_ok = false;
        }
        if (!audit.temporal_ok) throw TrainingError("temporal integrity violated");
        if (batch.replay_rows < batch.requested_replay) {
            state.events.push_back("epoch " + std::to_string(k) + ": replay shortfall " + std::to_string(batch.replay_rows) +
                                   " of " + std::to_string(batch.requested_replay));
        }

        const Eigen::VectorXi y = labels(batch.rows);
        const Eigen::VectorXi yv = labels(slice.validation);
        const Eigen::MatrixXd x_oof = context.pipeline.rows(batch.rows, TargetMode::OutOfFold);
        const Eigen::MatrixXd x_ord = context.pipeline.rows(batch.rows, TargetMode::Ordered);
        const Eigen::MatrixXd xv_oof = context.pipeline.rows(slice.validation, TargetMode::OutOfFold);
        const Eigen::MatrixXd xv_ord = context.pipeline.rows(slice.validation, TargetMode::Ordered);
        const Eigen::MatrixXd xd = context.pipeline.dense_rows(batch.rows);
        const Eigen::MatrixXd xvd = context.pipeline.dense_rows(slice.validation);

        stage("goss");
        const Holdout h_oof{xv_oof, yv};
        if (state.goss.fitted()) {
            state.goss.warm_start(x_oof, y, c.warm_rounds, &h_oof);
        } else {
            state.goss.fit(x_oof, y, c.initial_rounds, &h_oof);
        }

        stage("ordered");
        const Holdout h_ord{xv_ord, yv};
        if (state.ordered.fitted()) {
            state.ordered.warm_start(x_ord, y, c.warm_rounds, &h_ord);
        } else {
            state.ordered.fit(x_ord, y, c.initial_rounds, &h_ord);
        }

        stage("dense");
        const DenseBatch train{xd, y};
        const DenseBatch validation{xvd, yv};
        if (!state.dense) {
            state.dense = dense_train(DenseLightModel::initialize(xd.cols(), c.dense), train, validation, c.dense,
                                      c.dense.max_epochs, c.dense.learning_rate);
        } else {
            // Consistency with the previous gate: the dense model is pulled toward
            // the sharpened predictions of the current best expert.
            const Eigen::VectorXd& alpha = state.gate.weights;
            Eigen::MatrixXd batch_preds(y.size(), 3);
            batch_preds.col(0) = state.goss.predict_proba(x_oof);
            batch_preds.col(1) = state.ordered.predict_proba(x_ord);
            batch_preds.col(2) = dense_predict(*state.dense, xd);
            ConsistencyTerm term;
            term.other = alpha(0) * batch_preds.col(0) + alpha(1) * batch_preds.col(1);
            term.alpha = alpha(2);
            term.target = temperature_target(batch_preds.col(best_expert(state.gate.losses)), c.temperature);
            term.gamma = c.gamma;
            state.dense = dense_fine_tune(std::move(*state.dense), train, validation, c.dense, c.dense.fine_tune_epochs,
                                          nullptr, &term);
        }

        stage("gate");
        Eigen::MatrixXd preds(yv.size(), 3);
        preds.col(0) = state.goss.predict_proba(xv_oof);
        preds.col(1) = state.ordered.predict_proba(xv_ord);
        preds.col(2) = dense_predict(*state.dense, xvd);
        Eigen::VectorXd losses(3);
        for (int m = 0; m < 3; ++m) losses(m) = log_loss(yv, preds.col(m));
        state.gate = update_weights(std::move(state.gate), losses);
        const Eigen::VectorXd ensemble = blend(preds, state.gate.weights);

        GateTrajectoryRow g{k, slice.week, {}, {}};
        for (int m = 0; m < 3; ++m) {
            g.losses.push_back(losses(m));
            g.weights.push_back(state.gate.weights(m));
        }
        state.gate_history.push_back(std::move(g));

        for (int m = 0; m < 4; ++m) {
            const ModelId id = m < 3 ? kExpertIds[static_cast<std::size_t>(m)] : ModelId::Ensemble;
            const Eigen::VectorXd p = m < 3 ? Eigen::VectorXd(preds.col(m)) : ensemble;
            state.history.push_back({k, slice.week, id, safe_gini(yv, p, state.events, k, id), brier(yv, p), log_loss(yv, p)});
        }

        state.buffer.offer(slice.train, weeks);
        state.audit.push_back(audit);
        state.epochs_completed = k;
    } catch (const HydraError& e) {
        throw TrainingError("epoch " + std::to_string(k) + " (week " + std::to_string(slice.week) + ") failed: " + e.what());
    }
    return state;
}

std::vector<ModelSummary> summarize(const std::vector<WeeklyMetric>& history, const GiniStableOptions& options) {
    std::vector<ModelSummary> out;
    for (ModelId id : {ModelId::GossGbdt, ModelId::OrderedGbdt, ModelId::DenseLight, ModelId::Ensemble}) {
        ModelSummary s{id, {}};
        double brier_sum = 0.0, loss_sum = 0.0, gini_sum = 0.0;
        int n = 0;
        for (const auto& m : history) {
            if (m.model != id) continue;
            brier_sum += m.brier;
            loss_sum += m.log_loss;
            ++n;
            if (std::isfinite(m.gini)) {
                s.report.per_week_gini.emplace_back(m.week, m.gini);
                gini_sum += m.gini;
            }
        }
        if (n > 0) {
            s.report.brier = brier_sum / n;
            s.report.log_loss = loss_sum / n;
        }
        if (!s.report.per_week_gini.empty()) {
            s.report.gini = gini_sum / static_cast<double>(s.report.per_week_gini.size());
        }
        // Undefined below two weeks; reported as NaN rather than failing the run.
        s.report.gini_stable = s.report.per_week_gini.size() >= 2 ? gini_stable(s.report.per_week_gini, options)
                                                                  : std::numeric_limits<double>::quiet_NaN();
        out.push_back(std::move(s));
    }
    return out;
}

RunResult run(const FeatureFrame& frame, const TrainerConfig& config, const EpochHook& hook) {
    const RunContext context = prepare_run(frame, config);
    RunState state = initial_state(context);
    for (int k = 1; k <= static_cast<int>(context.plan.size()); ++k) state = run_epoch(state, context, k, hook);
    RunResult result;
    result.summary = summarize(state.history);
    result.ledger = context.pipeline.cross_ledger();
    result.variant = std::string(variant_label(context.config.ablation));
    result.state = std::move(state);
    return result;
}

}  // namespace hydra
