#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "riskgrid/config.hpp"
#include "riskgrid/pipeline.hpp"

namespace {

constexpr const char* kStageHelp[] = {
    "generate a seeded synthetic city into <workdir>/city",
    "compute spatio-temporal and visual feature tables",
    "aggregate accident severities and discretize risk levels",
    "train the configured model on the feature tables",
    "run the 5-fold protocol over every model/feature-set pair",
    "write per-cell risk predictions from the trained model",
    "rank input dimensions by integrated-gradients attribution",
    "export ground-truth/predicted risk heatmaps (GeoJSON + PNG)",
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-level traffic accident risk pipeline"};
    app.failure_message(CLI::FailureMessage::help);
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_override, "override the master seed from the config");

    const auto& stages = riskgrid::pipeline::stage_names();
    for (std::size_t i = 0; i < stages.size(); ++i) {
        app.add_subcommand(stages[i], kStageHelp[i]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        riskgrid::pipeline::PipelineConfig cfg;
        if (!config_path.empty()) {
            cfg = riskgrid::pipeline::load_config(config_path);
        }
        if (seed_opt->count() > 0) {
            cfg.seed = seed_override;
        }
        riskgrid::pipeline::run(app.get_subcommands().front()->get_name(), cfg);
        return 0;
    } catch (const riskgrid::pipeline::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const riskgrid::pipeline::ArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
