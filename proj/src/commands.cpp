#include "hydra/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "hydra/csv_io.hpp"
#include "hydra/format.hpp"
#include "hydra/random.hpp"

namespace hydra {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write \"" + path.string() + "\"");
    out << content;
    if (!out) throw DataError("write failed for \"" + path.string() + "\"");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read \"" + path.string() + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

FeatureFrame load_frame(const RunConfig& config) {
    if (config.data.path.empty()) return generate_synthetic(config.synthetic, mix64(config.seed, 0x5e7d));
    const Schema schema = parse_schema_declaration(config.data.schema, config.data.key_columns);
    FeatureFrame frame = ingest_csv(config.data.path, schema, IngestOptions{config.data.missing_sentinel});
    const auto problems = validate_frame(frame);
    if (!problems.empty()) throw DataError("invalid frame: " + problems.front());
    return frame;
}

std::string metrics_csv(const std::vector<WeeklyMetric>& history) {
    std::ostringstream out;
    write_csv_row(out, {"epoch", "week", "model", "gini", "brier", "log_loss"});
    for (const auto& m : history) {
        write_csv_row(out, {std::to_string(m.epoch), std::to_string(m.week), std::string(to_string(m.model)),
                            format_double(m.gini), format_double(m.brier), format_double(m.log_loss)});
    }
    return out.str();
}

std::string buffer_audit_csv(const std::vector<BufferAuditRow>& audit) {
    std::ostringstream out;
    write_csv_row(out, {"epoch", "week", "new_rows", "replay_rows", "requested_replay", "buffer_size", "max_batch_week",
                        "max_buffer_week", "temporal_ok"});
    for (const auto& a : audit) {
        write_csv_row(out, {std::to_string(a.epoch), std::to_string(a.week), std::to_string(a.new_rows),
                            std::to_string(a.replay_rows), std::to_string(a.requested_replay),
                            std::to_string(a.buffer_size), std::to_string(a.max_batch_week),
                            std::to_string(a.max_buffer_week), a.temporal_ok ? "true" : "false"});
    }
    return out.str();
}

std::string summary_text(const RunResult& result) {
    std::string out = "variant: " + result.variant + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %12s %10s %10s\n", "model", "gini_stable", "brier", "log_loss");
    out += line;
    for (const auto& s : result.summary) {
        std::snprintf(line, sizeof line, "%-14s %12.6f %10.6f %10.6f\n", std::string(to_string(s.model)).c_str(),
                      s.report.gini_stable, s.report.brier, s.report.log_loss);
        out += line;
    }
    return out;
}

RunResult run_to_directory(const RunConfig& input, const fs::path& dir) {
    RunConfig config = input;
    config.trainer.seed = config.seed;
    config.validate();
    const FeatureFrame frame = load_frame(config);
    RunResult result = run(frame, config.trainer);

    fs::create_directories(dir / "models");
    write_file(dir / "metrics.csv", metrics_csv(result.state.history));
    write_file(dir / "gate.csv", gate_trajectory_csv(result.state.gate_history));
    write_file(dir / "buffer_audit.csv", buffer_audit_csv(result.state.audit));
    write_file(dir / "autocross_ledger.txt", result.ledger.to_text());
    write_file(dir / "summary.txt", summary_text(result));
    std::string events;
    for (const auto& e : result.state.events) events += e + "\n";
    for (const auto& e : result.state.gate.events) events += e + "\n";
    write_file(dir / "events.txt", events);
    write_file(dir / "models" / "goss_gbdt.txt", result.state.goss.serialize());
    write_file(dir / "models" / "ordered_gbdt.txt", result.state.ordered.serialize());
    if (result.state.dense) write_file(dir / "models" / "denselight.txt", result.state.dense->serialize());

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::string meta = "created = " + std::string(stamp) + "\nvariant = " + result.variant +
                       "\nrows = " + std::to_string(frame.rows()) + "\n" + format_run_config(config);
    write_file(dir / "metadata.txt", meta);
    return result;
}

std::string report_long_csv(const fs::path& run_dir) {
    std::vector<std::string> missing;
    for (const char* name : {"metrics.csv", "gate.csv", "summary.txt", "metadata.txt"}) {
        if (!fs::exists(run_dir / name)) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw DataError("incomplete run directory \"" + run_dir.string() + "\": missing " + list);
    }
    std::istringstream in(read_file(run_dir / "metrics.csv"));
    const CsvTable table = parse_csv(in);
    const std::vector<std::string> expected{"epoch", "week", "model", "gini", "brier", "log_loss"};
    if (table.header != expected) throw DataError("metrics.csv has an unexpected header");
    std::ostringstream out;
    write_csv_row(out, {"epoch", "model", "metric", "value"});
    for (const auto& row : table.rows) {
        for (std::size_t m = 3; m < row.size(); ++m) write_csv_row(out, {row[0], row[2], expected[m], row[m]});
    }
    return out.str();
}

std::string error_line(const std::string& message) {
    std::string flat = message;
    for (char& c : flat) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return "hydra: error: " + flat;
}

}  // namespace hydra
