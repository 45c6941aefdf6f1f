#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncd/classifier.hpp"
#include "ncd/kmeans.hpp"
#include "ncd/postprocess.hpp"
#include "ncd/synthgen.hpp"
#include "ncd/types.hpp"

namespace ncd {

enum class PrototypeVariant {
    Default,      // GT prototypes for base classes, clusters for novel classes
    AllClusters,  // clusters only, no base prototypes
    GtOracle,     // GT prototypes for base and novel classes
};

struct PipelinePaths {
    std::filesystem::path data_dir;  // fallback location for inputs, using the synth file names
    std::filesystem::path base_gt, discovery_rpn, discovery_gt, test_rpn, test_gt, classes, box_embeddings,
        text_embeddings;
    std::filesystem::path output_dir = "out";
};

struct PipelineConfig {
    std::string preset = "voc";
    std::uint64_t seed = 0;
    int threads = 1;
    PipelinePaths paths;
    PrototypeVariant variant = PrototypeVariant::Default;
    KMeansConfig kmeans = KMeansConfig::voc(250);
    InferenceConfig inference;
    PostprocessConfig postprocess;
    MappingMethod mapping = MappingMethod::Hungarian;
    int kappa = 10;
    std::string iou_thresholds = "0.5";
    WorldConfig synth;

    /// Input path with the data_dir fallback applied.
    std::filesystem::path input(const std::filesystem::path PipelinePaths::*member) const;
    /// `run.seed` propagated into the clustering and synth seeds, `run.threads` into clustering.
    PipelineConfig resolved() const;
};

using ConfigOverride = std::pair<std::string, std::string>;  // "section.key", value

/// Applies `preset` ("voc" or "lvis") to the clustering and postprocess settings.
void apply_preset(PipelineConfig& cfg, const std::string& preset);

/// Sets one "section.key" option from its text form. Throws ConfigError for unknown keys or bad values.
void set_option(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Every option as (section.key, text value), in a fixed order.
std::vector<ConfigOverride> config_entries(const PipelineConfig& cfg);

/// Precedence: overrides > file > preset > defaults. The preset comes from the
/// `preset` argument, else from the file's run.preset, else "voc".
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<ConfigOverride>& overrides,
                           const std::optional<std::string>& preset = std::nullopt);

PipelineConfig parse_config_text(const std::string& text, const std::vector<ConfigOverride>& overrides = {},
                                 const std::optional<std::string>& preset = std::nullopt);

/// INI text ([section] / key = value) that parse_config_text reads back to an identical config.
std::string config_to_text(const PipelineConfig& cfg);

}  // namespace ncd
