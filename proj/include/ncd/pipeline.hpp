#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "ncd/config.hpp"
#include "ncd/error.hpp"

namespace ncd {

// Stage artifacts, all inside the configured output directory.
inline constexpr const char* kBasePrototypesFile = "base_prototypes.jsonl";
inline constexpr const char* kPrototypesFile = "prototypes.jsonl";
inline constexpr const char* kDetectionsFile = "detections.jsonl";
inline constexpr const char* kMappingFile = "mapping.jsonl";
inline constexpr const char* kMappedDetectionsFile = "mapped_detections.jsonl";
inline constexpr const char* kReportFile = "report.jsonl";
inline constexpr const char* kReportTableFile = "report.txt";

/// Process exit codes, one per error family.
enum class ExitCode : int {
    Ok = 0,
    Other = 1,
    Config = 2,
    MissingInput = 3,
    DimensionMismatch = 4,
    Format = 5,
    Domain = 6,
};

ExitCode exit_code_for(const std::exception& e) noexcept;

/// Error raised by a stage; what() carries the "[stage] " prefix.
class StageError : public Error {
public:
    StageError(std::string stage, ExitCode code, const std::string& message);

    const std::string& stage() const noexcept { return stage_; }
    ExitCode code() const noexcept { return code_; }

private:
    std::string stage_;
    ExitCode code_;
};

struct StageResult {
    std::string stage;
    std::vector<std::filesystem::path> artifacts;
    std::filesystem::path manifest;
    double seconds = 0;
};

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const std::filesystem::path& path);
std::string config_hash(const PipelineConfig& cfg);

/// Writes the synthetic world to paths.data_dir (or <output_dir>/world when unset).
StageResult run_synth(const PipelineConfig& cfg);
/// Base prototypes from the base GT features.
StageResult run_prototypes(const PipelineConfig& cfg);
/// Full prototype set for the configured variant. Default and GtOracle read the base prototypes artifact.
StageResult run_discover(const PipelineConfig& cfg);
/// Classifies and postprocesses every test image.
StageResult run_infer(const PipelineConfig& cfg);
/// Cluster to class mapping, by Hungarian matching on test GT or by embedding votes.
StageResult run_map(const PipelineConfig& cfg);
/// Applies the mapping and evaluates.
StageResult run_eval(const PipelineConfig& cfg);

/// prototypes, discover, infer, map, eval in order; synth first when `synthesize` is set.
std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, bool synthesize = false);

}  // namespace ncd
