#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncd/config.hpp"
#include "ncd/error.hpp"
#include "ncd/pipeline.hpp"

namespace {

struct Options {
    std::optional<std::string> config_file;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> preset;
    std::vector<std::string> sets;
    bool synthesize = false;
    bool print_config = false;
};

ncd::PipelineConfig build_config(const Options& o) {
    std::vector<ncd::ConfigOverride> overrides;
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ncd::ConfigError("--set expects section.key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) overrides.emplace_back("run.seed", std::to_string(*o.seed));
    if (o.threads) overrides.emplace_back("run.threads", std::to_string(*o.threads));
    std::optional<std::filesystem::path> file;
    if (o.config_file) file = *o.config_file;
    return ncd::load_config(file, overrides, o.preset);
}

void report(const std::vector<ncd::StageResult>& results) {
    for (const auto& r : results) {
        std::cout << "[" << r.stage << "] done in " << r.seconds << " s, manifest " << r.manifest.string() << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Novel class discovery and detection over precomputed box features"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_file, "INI config file");
    app.add_option("--seed", o.seed, "Run seed");
    app.add_option("--threads", o.threads, "Worker cap")->check(CLI::PositiveNumber);
    app.add_option("--preset", o.preset, "Hyperparameter preset")->check(CLI::IsMember({"voc", "lvis"}));
    app.add_option("--set", o.sets, "Override one option, section.key=value (repeatable)");
    app.add_flag("--print-config", o.print_config, "Print the resolved config before running");
    app.fallthrough();

    using Stage = ncd::StageResult (*)(const ncd::PipelineConfig&);
    const std::vector<std::pair<std::string, Stage>> stages = {
        {"prototypes", ncd::run_prototypes}, {"discover", ncd::run_discover}, {"infer", ncd::run_infer},
        {"map", ncd::run_map},               {"eval", ncd::run_eval},         {"synth", ncd::run_synth},
    };
    const std::map<std::string, std::string> help = {
        {"prototypes", "Base prototypes from base GT features"},
        {"discover", "Cluster discovery RPN features into novel prototypes"},
        {"infer", "Classify and postprocess test proposals"},
        {"map", "Map clusters to classes"},
        {"eval", "Apply the mapping and evaluate"},
        {"synth", "Write a synthetic feature world"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, fn] : stages) subs.push_back(app.add_subcommand(name, help.at(name)));
    CLI::App* pipeline = app.add_subcommand("pipeline", "Run prototypes, discover, infer, map and eval");
    pipeline->add_flag("--synth", o.synthesize, "Generate the synthetic world first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ncd::ExitCode::Config);
    }

    try {
        const ncd::PipelineConfig cfg = build_config(o);
        if (o.print_config) std::cout << ncd::config_to_text(cfg) << '\n';
        if (pipeline->parsed()) {
            report(ncd::run_pipeline(cfg, o.synthesize));
            return 0;
        }
        for (std::size_t i = 0; i < stages.size(); ++i) {
            if (subs[i]->parsed()) {
                report({stages[i].second(cfg)});
                return 0;
            }
        }
    } catch (const ncd::StageError& e) {
        std::cerr << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "[config] " << e.what() << '\n';
        return static_cast<int>(ncd::exit_code_for(e));
    }
    return static_cast<int>(ncd::ExitCode::Other);
}
