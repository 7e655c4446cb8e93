#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/core_data.hpp"
#include "hydra/denselight.hpp"
#include "hydra/ensemble_gate.hpp"
#include "hydra/features.hpp"
#include "hydra/gbdt.hpp"
#include "hydra/random.hpp"

namespace hydra {

enum class Ablation { None, NoGraph, NoAutoCross, NoSpectro, UniformGate };

inline constexpr Ablation kAblations[] = {Ablation::None, Ablation::NoGraph, Ablation::NoAutoCross, Ablation::NoSpectro,
                                          Ablation::UniformGate};

/// "none", "no-graph", "no-autocross", "no-spectro", "uniform-gate".
std::string_view to_string(Ablation ablation);
Ablation parse_ablation(std::string_view text);
/// Human-readable variant name used in run summaries.
std::string_view variant_label(Ablation ablation);

struct TrainerConfig {
    FeatureOptions features;
    BoosterConfig goss;
    BoosterConfig ordered;
    DenseLightConfig dense;

    int initial_rounds = 50;
    int warm_rounds = 20;
    int burn_in_weeks = 3;
    double validation_fraction = 0.2;
    double replay_ratio = 1.0;  // replay rows per new row
    /// Zero derives the capacity as buffer_multiplier x median weekly train rows.
    Eigen::Index buffer_capacity = 0;
    double buffer_multiplier = 10.0;

    double gate_prior = 1.0;
    double temperature = 2.0;
    double gamma = 0.1;

    Ablation ablation = Ablation::None;
    std::uint64_t seed = 0;

    TrainerConfig();
    void validate() const;
};

/// Switches the feature blocks or the gate off as the ablation requires.
TrainerConfig apply_ablation(TrainerConfig config);

/// Uniform reservoir sample over every row ever offered.
class ReplayBuffer {
public:
    struct Entry {
        Eigen::Index row = 0;
        int week = 0;
    };

    ReplayBuffer() : ReplayBuffer(0, 0) {}
    ReplayBuffer(Eigen::Index capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

    void offer(std::span<const Eigen::Index> rows, const Eigen::VectorXi& weeks);
    /// `n` entries without replacement, or all of them when fewer are stored.
    std::vector<Entry> sample(std::size_t n, std::uint64_t seed) const;

    const std::vector<Entry>& entries() const { return entries_; }
    Eigen::Index capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    std::uint64_t seen() const { return seen_; }

private:
    Eigen::Index capacity_;
    std::vector<Entry> entries_;
    std::uint64_t seen_ = 0;
    Rng rng_;
};

struct EpochSlice {
    int week = 0;
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> validation;
};

/// One epoch per distinct week in ascending order. Validation is a
/// label-stratified `validation_fraction` of each week.
struct EpochPlan {
    std::vector<EpochSlice> epochs;
    double replay_ratio = 1.0;

    std::size_t size() const { return epochs.size(); }
};

EpochPlan make_plan(const FeatureFrame& frame, double validation_fraction, double replay_ratio, std::uint64_t seed);

struct EpochBatch {
    std::vector<Eigen::Index> rows;  // new rows first, then replay rows
    std::vector<int> origin_week;
    std::size_t new_rows = 0;
    std::size_t replay_rows = 0;
    std::size_t requested_replay = 0;
};

/// New rows plus min(ratio x new, buffer size) replay rows drawn from the buffer.
EpochBatch make_epoch_batch(std::span<const Eigen::Index> new_rows, const Eigen::VectorXi& weeks,
                            const ReplayBuffer& buffer, double ratio, std::uint64_t seed);

struct WeeklyMetric {
    int epoch = 0;
    int week = 0;
    ModelId model = ModelId::Ensemble;
    double gini = 0.0;
    double brier = 0.0;
    double log_loss = 0.0;
};

struct BufferAuditRow {
    int epoch = 0;
    int week = 0;
    std::size_t new_rows = 0;
    std::size_t replay_rows = 0;
    std::size_t requested_replay = 0;
    std::size_t buffer_size = 0;
    int max_batch_week = 0;
    int max_buffer_week = 0;  // 0 when empty
    /// No batch row after `week` and no buffered row from `week` or later.
    bool temporal_ok = true;
};

struct RunState {
    Booster goss;
    Booster ordered;
    std::optional<DenseLightModel> dense;
    GateState gate;
    ReplayBuffer buffer;
    int epochs_completed = 0;
    std::vector<WeeklyMetric> history;
    std::vector<GateTrajectoryRow> gate_history;
    std::vector<BufferAuditRow> audit;
    std::vector<std::string> events;

    /// Hash of every model parameter, buffer entry and history value.
    std::uint64_t fingerprint() const;
};

/// Everything an epoch reads but never writes.
struct RunContext {
    const FeatureFrame& frame;
    FeaturePipeline pipeline;
    EpochPlan plan;
    TrainerConfig config;  // ablation already applied, component seeds derived
};

/// Called with the stage name ("batch", "goss", "ordered", "dense", "gate")
/// before each step; throwing aborts the epoch.
using EpochHook = std::function<void(std::string_view stage, int epoch)>;

RunContext prepare_run(const FeatureFrame& frame, const TrainerConfig& config);
RunState initial_state(const RunContext& context);

/// Runs epoch `k` (1-based). The input state is never modified, so a failed
/// epoch leaves the caller's state exactly as it was; failures surface as
/// TrainingError naming the epoch.
RunState run_epoch(const RunState& state, const RunContext& context, int k, const EpochHook& hook = {});

struct ModelSummary {
    ModelId model = ModelId::Ensemble;
    MetricReport report;
};

struct RunResult {
    RunState state;
    std::vector<ModelSummary> summary;  // three experts, then the ensemble
    CrossLedger ledger;
    std::string variant;
};

std::vector<ModelSummary> summarize(const std::vector<WeeklyMetric>& history, const GiniStableOptions& options = {});

RunResult run(const FeatureFrame& frame, const TrainerConfig& config, const EpochHook& hook = {});

}  // namespace hydra
