#include "hydra/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "hydra/format.hpp"

namespace hydra {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss{std::string(text)};
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values, std::string_view sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += sep;
        if constexpr (std::is_same_v<T, double>) {
            out += format_double(values[i]);
        } else if constexpr (std::is_same_v<T, std::string>) {
            out += values[i];
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

bool parse_bool(std::string_view text) {
    if (text == "true" || text == "1" || text == "on") return true;
    if (text == "false" || text == "0" || text == "off") return false;
    throw ConfigError("expected true or false, found \"" + std::string(text) + "\"");
}

// "kind@week:magnitude;..."
std::vector<DriftEvent> parse_drift(std::string_view text) {
    std::vector<DriftEvent> events;
    for (const auto& item : split_list(text, ';')) {
        const auto at = item.find('@');
        const auto colon = item.find(':', at == std::string::npos ? 0 : at);
        if (at == std::string::npos || colon == std::string::npos) {
            throw ConfigError("drift event \"" + item + "\" needs the form kind@week:magnitude");
        }
        DriftEvent e;
        e.kind = parse_drift_kind(trim(item.substr(0, at)));
        e.week = parse_int<int>(trim(item.substr(at + 1, colon - at - 1)));
        e.magnitude = parse_double(trim(item.substr(colon + 1)));
        events.push_back(e);
    }
    return events;
}

std::string format_drift(const std::vector<DriftEvent>& events) {
    std::string out;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (i) out += ";";
        out += std::string(to_string(events[i].kind)) + "@" + std::to_string(events[i].week) + ":" +
               format_double(events[i].magnitude);
    }
    return out;
}

struct Key {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T, typename Access>
Key field(std::string name, Access access) {
    Key k;
    k.name = std::move(name);
    k.get = [access](const RunConfig& c) -> std::string {
        const T& v = access(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<T, bool>) {
            return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
            return format_double(v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            return v;
        } else if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<int>> ||
                             std::is_same_v<T, std::vector<std::string>>) {
            return join(v);
        } else {
            return std::to_string(v);
        }
    };
    k.set = [access](RunConfig& c, std::string_view text) {
        T& v = access(c);
        if constexpr (std::is_same_v<T, bool>) {
            v = parse_bool(text);
        } else if constexpr (std::is_same_v<T, double>) {
            v = parse_double(text);
        } else if constexpr (std::is_same_v<T, std::string>) {
            v = std::string(text);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            v.clear();
            for (const auto& s : split_list(text)) v.push_back(parse_double(s));
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            v.clear();
            for (const auto& s : split_list(text)) v.push_back(parse_int<int>(s));
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            v = split_list(text);
        } else {
            v = parse_int<T>(text);
        }
    };
    return k;
}

#define HYDRA_FIELD(type, key, member) field<type>(key, [](RunConfig& c) -> type& { return c.member; })

Key enum_key(std::string name, std::function<std::string(const RunConfig&)> get,
             std::function<void(RunConfig&, std::string_view)> set) {
    return Key{std::move(name), std::move(get), std::move(set)};
}

void add_booster(std::vector<Key>& keys, const std::string& p, BoosterConfig TrainerConfig::*member) {
    auto b = [member](RunConfig& c) -> BoosterConfig& { return c.trainer.*member; };
    keys.push_back(field<double>(p + ".learning_rate", [b](RunConfig& c) -> double& { return b(c).learning_rate; }));
    keys.push_back(field<double>(p + ".lambda", [b](RunConfig& c) -> double& { return b(c).lambda; }));
    keys.push_back(field<int>(p + ".max_bin", [b](RunConfig& c) -> int& { return b(c).max_bin; }));
    keys.push_back(field<int>(p + ".max_leaves", [b](RunConfig& c) -> int& { return b(c).max_leaves; }));
    keys.push_back(field<int>(p + ".max_depth", [b](RunConfig& c) -> int& { return b(c).max_depth; }));
    keys.push_back(field<int>(p + ".min_data_in_leaf", [b](RunConfig& c) -> int& { return b(c).min_data_in_leaf; }));
    keys.push_back(field<double>(p + ".min_split_gain", [b](RunConfig& c) -> double& { return b(c).min_split_gain; }));
    keys.push_back(field<double>(p + ".goss_top_rate", [b](RunConfig& c) -> double& { return b(c).goss_top_rate; }));
    keys.push_back(field<double>(p + ".goss_other_rate", [b](RunConfig& c) -> double& { return b(c).goss_other_rate; }));
    keys.push_back(
        field<int>(p + ".early_stopping_rounds", [b](RunConfig& c) -> int& { return b(c).early_stopping_rounds; }));
    keys.push_back(field<std::uint64_t>(p + ".seed", [b](RunConfig& c) -> std::uint64_t& { return b(c).seed; }));
}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        k.push_back(HYDRA_FIELD(std::uint64_t, "run.seed", seed));
        k.push_back(HYDRA_FIELD(std::string, "run.output_dir", output_dir));
        k.push_back(enum_key(
            "run.ablation", [](const RunConfig& c) { return std::string(to_string(c.trainer.ablation)); },
            [](RunConfig& c, std::string_view v) { c.trainer.ablation = parse_ablation(v); }));

        k.push_back(HYDRA_FIELD(std::string, "data.path", data.path));
        k.push_back(HYDRA_FIELD(std::string, "data.schema", data.schema));
        k.push_back(HYDRA_FIELD(std::vector<std::string>, "data.key_columns", data.key_columns));
        k.push_back(HYDRA_FIELD(std::string, "data.missing_sentinel", data.missing_sentinel));

        k.push_back(HYDRA_FIELD(int, "synthetic.weeks", synthetic.weeks));
        k.push_back(HYDRA_FIELD(int, "synthetic.rows_per_week", synthetic.rows_per_week));
        k.push_back(HYDRA_FIELD(int, "synthetic.series_length", synthetic.series_length));
        k.push_back(HYDRA_FIELD(int, "synthetic.periodic_frequency", synthetic.periodic_frequency));
        k.push_back(HYDRA_FIELD(int, "synthetic.employers", synthetic.employers));
        k.push_back(HYDRA_FIELD(int, "synthetic.noise_features", synthetic.noise_features));
        k.push_back(HYDRA_FIELD(double, "synthetic.intercept", synthetic.intercept));
        k.push_back(HYDRA_FIELD(double, "synthetic.linear_strength", synthetic.linear_strength));
        k.push_back(HYDRA_FIELD(double, "synthetic.interaction_strength", synthetic.interaction_strength));
        k.push_back(HYDRA_FIELD(double, "synthetic.periodic_strength", synthetic.periodic_strength));
        k.push_back(HYDRA_FIELD(double, "synthetic.relational_strength", synthetic.relational_strength));
        k.push_back(HYDRA_FIELD(double, "synthetic.category_strength", synthetic.category_strength));
        k.push_back(HYDRA_FIELD(double, "synthetic.peer_noise", synthetic.peer_noise));
        k.push_back(HYDRA_FIELD(double, "synthetic.missing_rate", synthetic.missing_rate));
        k.push_back(enum_key(
            "synthetic.drift", [](const RunConfig& c) { return format_drift(c.synthetic.drift); },
            [](RunConfig& c, std::string_view v) { c.synthetic.drift = parse_drift(v); }));

        k.push_back(HYDRA_FIELD(int, "trainer.initial_rounds", trainer.initial_rounds));
        k.push_back(HYDRA_FIELD(int, "trainer.warm_rounds", trainer.warm_rounds));
        k.push_back(HYDRA_FIELD(int, "trainer.burn_in_weeks", trainer.burn_in_weeks));
        k.push_back(HYDRA_FIELD(double, "trainer.validation_fraction", trainer.validation_fraction));
        k.push_back(HYDRA_FIELD(double, "trainer.replay_ratio", trainer.replay_ratio));
        k.push_back(HYDRA_FIELD(Eigen::Index, "trainer.buffer_capacity", trainer.buffer_capacity));
        k.push_back(HYDRA_FIELD(double, "trainer.buffer_multiplier", trainer.buffer_multiplier));

        k.push_back(HYDRA_FIELD(double, "gate.prior", trainer.gate_prior));
        k.push_back(HYDRA_FIELD(double, "gate.temperature", trainer.temperature));
        k.push_back(HYDRA_FIELD(double, "gate.gamma", trainer.gamma));

        add_booster(k, "goss", &TrainerConfig::goss);
        add_booster(k, "ordered", &TrainerConfig::ordered);

        k.push_back(HYDRA_FIELD(int, "denselight.width", trainer.dense.width));
        k.push_back(HYDRA_FIELD(int, "denselight.blocks", trainer.dense.blocks));
        k.push_back(HYDRA_FIELD(int, "denselight.gap_groups", trainer.dense.gap_groups));
        k.push_back(HYDRA_FIELD(double, "denselight.smoothing", trainer.dense.smoothing));
        k.push_back(HYDRA_FIELD(double, "denselight.learning_rate", trainer.dense.learning_rate));
        k.push_back(HYDRA_FIELD(double, "denselight.momentum", trainer.dense.momentum));
        k.push_back(HYDRA_FIELD(int, "denselight.batch_size", trainer.dense.batch_size));
        k.push_back(HYDRA_FIELD(int, "denselight.max_epochs", trainer.dense.max_epochs));
        k.push_back(HYDRA_FIELD(int, "denselight.patience", trainer.dense.patience));
        k.push_back(HYDRA_FIELD(double, "denselight.fine_tune_factor", trainer.dense.fine_tune_factor));
        k.push_back(HYDRA_FIELD(int, "denselight.fine_tune_epochs", trainer.dense.fine_tune_epochs));
        k.push_back(HYDRA_FIELD(std::uint64_t, "denselight.seed", trainer.dense.seed));

        k.push_back(HYDRA_FIELD(bool, "features.graph", trainer.features.graph));
        k.push_back(HYDRA_FIELD(bool, "features.autocross", trainer.features.autocross));
        k.push_back(HYDRA_FIELD(bool, "features.spectro", trainer.features.spectro));
        k.push_back(HYDRA_FIELD(std::string, "features.series_prefix", trainer.features.series_prefix));
        k.push_back(HYDRA_FIELD(int, "features.window", trainer.features.window.window));
        k.push_back(HYDRA_FIELD(std::vector<double>, "features.window_quantiles", trainer.features.window.quantiles));
        k.push_back(HYDRA_FIELD(std::vector<int>, "features.window_lags", trainer.features.window.lags));
        k.push_back(HYDRA_FIELD(int, "features.one_hot_below", trainer.features.thresholds.one_hot_below));
        k.push_back(HYDRA_FIELD(int, "features.ordinal_up_to", trainer.features.thresholds.ordinal_up_to));
        k.push_back(HYDRA_FIELD(double, "features.te_strength", trainer.features.te_strength));
        k.push_back(HYDRA_FIELD(double, "features.te_noise", trainer.features.te_noise));
        k.push_back(HYDRA_FIELD(int, "features.te_folds", trainer.features.te_folds));
        k.push_back(HYDRA_FIELD(bool, "features.psi_screen", trainer.features.psi_screen));
        k.push_back(HYDRA_FIELD(double, "features.psi_threshold", trainer.features.psi_threshold));
        k.push_back(HYDRA_FIELD(int, "features.psi_bins", trainer.features.psi_bins));
        k.push_back(HYDRA_FIELD(bool, "features.drift_normalize", trainer.features.drift_normalize));
        k.push_back(HYDRA_FIELD(int, "features.drift_period_weeks", trainer.features.drift_period_weeks));
        k.push_back(HYDRA_FIELD(double, "features.dense_clip", trainer.features.dense_clip));

        k.push_back(enum_key(
            "spectro.wavelet", [](const RunConfig& c) { return std::string(to_string(c.trainer.features.wavelet)); },
            [](RunConfig& c, std::string_view v) { c.trainer.features.wavelet = parse_wavelet_family(v); }));
        k.push_back(HYDRA_FIELD(std::vector<double>, "spectro.scales", trainer.features.wavelet_scales));
        k.push_back(HYDRA_FIELD(std::vector<int>, "spectro.frequencies", trainer.features.frequencies));
        k.push_back(HYDRA_FIELD(double, "spectro.variance_quantile", trainer.features.spectral_variance_quantile));

        k.push_back(HYDRA_FIELD(std::vector<std::string>, "graph.key_columns", trainer.features.graph_options.key_columns));
        k.push_back(HYDRA_FIELD(int, "graph.max_neighbors", trainer.features.graph_options.max_neighbors));
        k.push_back(HYDRA_FIELD(std::uint64_t, "graph.seed", trainer.features.graph_options.seed));
        k.push_back(HYDRA_FIELD(int, "graph.heads", trainer.features.gat.heads));
        k.push_back(HYDRA_FIELD(int, "graph.hidden", trainer.features.gat.hidden));
        k.push_back(HYDRA_FIELD(int, "graph.embedding", trainer.features.gat.embedding));
        k.push_back(HYDRA_FIELD(double, "graph.leaky_slope", trainer.features.gat.leaky_slope));
        k.push_back(HYDRA_FIELD(int, "graph.epochs", trainer.features.gat.epochs));
        k.push_back(HYDRA_FIELD(double, "graph.learning_rate", trainer.features.gat.learning_rate));
        k.push_back(HYDRA_FIELD(std::uint64_t, "graph.gat_seed", trainer.features.gat.seed));

        k.push_back(HYDRA_FIELD(int, "autocross.min_support", trainer.features.autocross_config.min_support));
        k.push_back(HYDRA_FIELD(int, "autocross.max_order", trainer.features.autocross_config.max_order));
        k.push_back(HYDRA_FIELD(int, "autocross.beam_width", trainer.features.autocross_config.beam_width));
        k.push_back(HYDRA_FIELD(int, "autocross.generations", trainer.features.autocross_config.generations));
        k.push_back(HYDRA_FIELD(int, "autocross.probe_trees", trainer.features.autocross_config.probe_trees));
        k.push_back(HYDRA_FIELD(int, "autocross.probe_depth", trainer.features.autocross_config.probe_depth));
        k.push_back(HYDRA_FIELD(int, "autocross.probe_seeds", trainer.features.autocross_config.probe_seeds));
        k.push_back(HYDRA_FIELD(double, "autocross.margin_sigmas", trainer.features.autocross_config.margin_sigmas));
        k.push_back(HYDRA_FIELD(int, "autocross.null_probes", trainer.features.autocross_config.null_probes));
        k.push_back(HYDRA_FIELD(double, "autocross.prune_floor", trainer.features.autocross_config.prune_floor));
        k.push_back(HYDRA_FIELD(std::uint64_t, "autocross.seed", trainer.features.autocross_config.seed));
        k.push_back(HYDRA_FIELD(double, "autocross.holdout_fraction", trainer.features.autocross_holdout_fraction));
        return k;
    }();
    return keys;
}

#undef HYDRA_FIELD

}  // namespace

void RunConfig::validate() const {
    trainer.validate();
    if (data.path.empty()) {
        synthetic.validate();
    } else if (data.schema.empty()) {
        throw ConfigError("data.schema is required when data.path is set");
    }
    if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
    for (const auto& k : registry()) {
        if (k.name == key) {
            try {
                k.set(config, value);
            } catch (const HydraError& e) {
                throw ConfigError("config key \"" + std::string(key) + "\": " + e.what());
            }
            return;
        }
    }
    throw ConfigError("unknown config key \"" + std::string(key) + "\"");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
    std::stringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        }
        try {
            set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
        }
    }
    base.trainer.seed = base.seed;
    return base;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file \"" + path + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : registry()) out.emplace_back(k.name, k.get(config));
    return out;
}

std::string format_run_config(const RunConfig& config) {
    std::string out;
    for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
    return out;
}

}  // namespace hydra
