#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hydra/commands.hpp"
#include "hydra/csv_io.hpp"
#include "hydra/random.hpp"

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string ablation;
    std::string run_dir;
};

hydra::RunConfig resolve(const Options& o) {
    hydra::RunConfig config = o.config_path.empty() ? hydra::RunConfig{} : hydra::load_run_config(o.config_path);
    if (o.seed) config.seed = *o.seed;
    if (!o.ablation.empty()) config.trainer.ablation = hydra::parse_ablation(o.ablation);
    config.trainer.seed = config.seed;
    config.validate();
    return config;
}

int ingest(const Options& o) {
    const auto config = resolve(o);
    if (config.data.path.empty()) throw hydra::ConfigError("ingest needs data.path and data.schema in the config");
    const auto frame = hydra::load_frame(config);
    std::cout << "rows = " << frame.rows() << "\nnumeric = " << frame.numeric.cols()
              << "\ncategorical = " << frame.categorical.cols() << "\nmissing = " << frame.missing.count() << "\n";
    if (!o.out.empty()) {
        std::ofstream out(o.out, std::ios::binary);
        if (!out) throw hydra::DataError("cannot write \"" + o.out + "\"");
        hydra::write_frame_csv(out, frame);
    }
    return hydra::kExitOk;
}

int generate(const Options& o) {
    auto config = resolve(o);
    config.data = {};
    const auto frame = hydra::load_frame(config);
    const std::string path = o.out.empty() ? "synthetic.csv" : o.out;
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw hydra::DataError("cannot write \"" + path + "\"");
        hydra::write_frame_csv(out, frame);
    }
    // Sidecar config that ingests the generated file.
    std::ofstream cfg(path + ".cfg", std::ios::binary);
    cfg << "data.path = " << path << "\ndata.schema = " << hydra::schema_declaration(frame.schema)
        << "\ndata.key_columns = ";
    for (std::size_t i = 0; i < frame.schema.key_columns.size(); ++i) cfg << (i ? "," : "") << frame.schema.key_columns[i];
    cfg << "\n";
    std::cout << "wrote " << frame.rows() << " rows to " << path << " and its config to " << path << ".cfg\n";
    return hydra::kExitOk;
}

int run(const Options& o) {
    auto config = resolve(o);
    if (!o.out.empty()) config.output_dir = o.out;
    const auto result = hydra::run_to_directory(config, config.output_dir);
    std::cout << hydra::summary_text(result);
    return hydra::kExitOk;
}

int report(const Options& o) {
    const std::filesystem::path dir = o.run_dir;
    if (!std::filesystem::is_directory(dir)) throw hydra::DataError("run directory \"" + o.run_dir + "\" does not exist");
    const std::string csv = hydra::report_long_csv(dir);
    const std::filesystem::path target = o.out.empty() ? dir / "report.csv" : std::filesystem::path(o.out);
    std::ofstream out(target, std::ios::binary);
    if (!out) throw hydra::DataError("cannot write \"" + target.string() + "\"");
    out << csv;
    std::cout << "wrote " << target.string() << "\n";
    return hydra::kExitOk;
}

int validate_config(const Options& o) {
    std::cout << hydra::format_run_config(resolve(o));
    return hydra::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hydra: incremental hybrid ensemble toolkit"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "flat key = value config file");
        sub->add_option("--seed", o.seed, "master seed; overrides run.seed");
        sub->add_option("--out", o.out, "output path");
    };
    auto* ingest_cmd = app.add_subcommand("ingest", "read a CSV with the declared schema");
    add_common(ingest_cmd);
    auto* generate_cmd = app.add_subcommand("generate", "write a synthetic drift stream as CSV");
    add_common(generate_cmd);
    auto* run_cmd = app.add_subcommand("run", "train over all weekly epochs and write run artifacts");
    add_common(run_cmd);
    run_cmd->add_option("--ablation", o.ablation, "none, no-graph, no-autocross, no-spectro or uniform-gate")
        ->check(CLI::IsMember({"none", "no-graph", "no-autocross", "no-spectro", "uniform-gate"}));
    auto* report_cmd = app.add_subcommand("report", "long-format CSV from a completed run directory");
    report_cmd->add_option("run_dir", o.run_dir, "run directory")->required();
    report_cmd->add_option("--out", o.out, "output CSV (default <run_dir>/report.csv)");
    auto* validate_cmd = app.add_subcommand("validate-config", "parse a config and print every resolved key");
    add_common(validate_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << hydra::error_line(e.what()) << "\n";
        return hydra::kExitUsage;
    }

    try {
        if (*ingest_cmd) return ingest(o);
        if (*generate_cmd) return generate(o);
        if (*run_cmd) return run(o);
        if (*report_cmd) return report(o);
        if (*validate_cmd) return validate_config(o);
    } catch (const hydra::ConfigError& e) {
        std::cerr << hydra::error_line(e.what()) << "\n";
        return hydra::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << hydra::error_line(e.what()) << "\n";
        return hydra::kExitFailure;
    }
    return hydra::kExitUsage;
}
