#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hydra/synthetic.hpp"
#include "hydra/trainer.hpp"

namespace hydra {

struct DataConfig {
    /// CSV input; empty means the synthetic generator supplies the frame.
    std::string path;
    /// "name:kind,..." declaration, required with `path`.
    std::string schema;
    std::vector<std::string> key_columns;
    std::string missing_sentinel = "NA";
};

/// Flat `key = value` configuration. Keys carry a dotted section prefix,
/// `#` starts a comment, blank lines are ignored and unknown keys are errors.
/// Every key has a default; config_entries() lists all of them.
struct RunConfig {
    DataConfig data;
    SyntheticSpec synthetic = SyntheticSpec::drift_fixture();
    TrainerConfig trainer;
    std::string output_dir = "hydra_run";
    std::uint64_t seed = 0;

    void validate() const;
};

/// Throws ConfigError naming the line for malformed or unknown entries.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
/// Throws ConfigError naming the path when it cannot be read.
RunConfig load_run_config(const std::string& path);

void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
/// Every key with its current value, in documentation order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::string format_run_config(const RunConfig& config);

}  // namespace hydra
