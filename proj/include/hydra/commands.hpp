#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hydra/run_config.hpp"
#include "hydra/trainer.hpp"

namespace hydra {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// The frame a config describes: the CSV at data.path, or the generator
/// seeded from run.seed.
FeatureFrame load_frame(const RunConfig& config);

std::string metrics_csv(const std::vector<WeeklyMetric>& history);
std::string buffer_audit_csv(const std::vector<BufferAuditRow>& audit);
/// Tab-free fixed-width table: model, gini_stable, brier, log_loss.
std::string summary_text(const RunResult& result);

/// Runs training and writes metrics.csv, gate.csv, buffer_audit.csv,
/// autocross_ledger.txt, summary.txt, events.txt, models/*.txt and
/// metadata.txt into `dir`. Only metadata.txt carries a timestamp.
RunResult run_to_directory(const RunConfig& config, const std::filesystem::path& dir);

/// Long-format rows "epoch,model,metric,value" from a completed run
/// directory; throws DataError listing missing artifacts.
std::string report_long_csv(const std::filesystem::path& run_dir);

/// Single-line "hydra: error: <message>" with newlines flattened.
std::string error_line(const std::string& message);

}  // namespace hydra
