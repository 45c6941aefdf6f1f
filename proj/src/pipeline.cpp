#include "ncd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ncd/assignment.hpp"
#include "ncd/classifier.hpp"
#include "ncd/evaluation.hpp"
#include "ncd/feature_io.hpp"
#include "ncd/json_io.hpp"
#include "ncd/kmeans.hpp"
#include "ncd/postprocess.hpp"
#include "ncd/prototypes.hpp"
#include "ncd/synthgen.hpp"

namespace ncd {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path require(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw MissingInputError(what + " '" + path.string() + "' does not exist");
    return path;
}

void check_dim(Eigen::Index expected, std::uint32_t got, const std::string& what) {
    if (static_cast<Eigen::Index>(got) != expected) {
        throw DimensionError(what + " has dimension " + std::to_string(got) + ", expected " + std::to_string(expected));
    }
}

json config_json(const PipelineConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
    return j;
}

struct Manifest {
    std::string stage;
    const PipelineConfig& cfg;
    Clock::time_point start = Clock::now();
    json inputs = json::object();
    json details = json::object();
    std::vector<fs::path> artifacts = {};

    void input(const fs::path& p) { inputs[p.string()] = file_hash(p); }

    StageResult finish() {
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
        json arts = json::object();
        for (const auto& a : artifacts) arts[a.filename().string()] = file_hash(a);
        json m = {{"stage", stage},
                  {"config_hash", config_hash(cfg)},
                  {"seed", cfg.seed},
                  {"threads", cfg.threads},
                  {"timings", {{"seconds", seconds}}},
                  {"inputs", inputs},
                  {"artifacts", arts},
                  {"details", details},
                  {"config", config_json(cfg)}};
        const fs::path path = cfg.paths.output_dir / (stage + ".manifest.json");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw FormatError(FormatError::Kind::Io, "cannot write '" + path.string() + "'");
        out << m.dump(2) << '\n';
        return {stage, artifacts, path, seconds};
    }
};

template <typename F>
StageResult staged(const std::string& stage, const PipelineConfig& cfg, F&& body) {
    try {
        fs::create_directories(cfg.paths.output_dir);
        Manifest manifest{stage, cfg};
        body(manifest);
        return manifest.finish();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, exit_code_for(e), e.what());
    }
}

fs::path out_path(const PipelineConfig& cfg, const char* name) { return cfg.paths.output_dir / name; }

std::vector<FeatureRecord> read_records(Manifest& m, const fs::path& path, const std::string& what,
                                        std::uint32_t* dim = nullptr, const Magic& magic = kFeatureMagic) {
    require(path, what);
    m.input(path);
    FeatureFile file = read_feature_file(path, magic);
    if (dim) *dim = file.dim;
    return std::move(file.records);
}

PrototypeSet read_prototype_artifact(Manifest& m, const fs::path& path, const std::string& what) {
    require(path, what);
    m.input(path);
    return read_prototypes(path);
}

std::string variant_name(PrototypeVariant v) {
    switch (v) {
        case PrototypeVariant::Default: return "default";
        case PrototypeVariant::AllClusters: return "all_clusters";
        case PrototypeVariant::GtOracle: return "gt_oracle";
    }
    return "?";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ExitCode exit_code_for(const std::exception& e) noexcept {
    if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->code();
    if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::Config;
    if (dynamic_cast<const MissingInputError*>(&e)) return ExitCode::MissingInput;
    if (dynamic_cast<const DimensionError*>(&e)) return ExitCode::DimensionMismatch;
    if (dynamic_cast<const FormatError*>(&e)) return ExitCode::Format;
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return ExitCode::Format;
    if (dynamic_cast<const DomainError*>(&e)) return ExitCode::Domain;
    return ExitCode::Other;
}

StageError::StageError(std::string stage, ExitCode code, const std::string& message)
    : Error("[" + stage + "] " + message), stage_(std::move(stage)), code_(code) {}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const fs::path& path) { return fnv1a_hex(read_bytes(path)); }

std::string config_hash(const PipelineConfig& cfg) { return fnv1a_hex(config_to_text(cfg)); }

StageResult run_synth(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("synth", cfg, [&](Manifest& m) {
        const fs::path dir = cfg.paths.data_dir.empty() ? cfg.paths.output_dir / "world" : cfg.paths.data_dir;
        const World world = generate(cfg.synth);
        const WorldFiles f = write_world(world, cfg.synth, dir);
        m.artifacts = {f.base_gt,  f.discovery_rpn, f.discovery_gt,   f.test_rpn,       f.test_gt,
                       f.classes,  f.truth,         f.box_embeddings, f.text_embeddings};
        m.details = {{"directory", dir.string()},
                     {"base_gt", world.base_gt.size()},
                     {"discovery_rpn", world.discovery_rpn.size()},
                     {"test_rpn", world.test_rpn.size()},
                     {"test_gt", world.test_gt.size()}};
    });
}

StageResult run_prototypes(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("prototypes", cfg, [&](Manifest& m) {
        const auto gt = read_records(m, cfg.input(&PipelinePaths::base_gt), "base GT features");
        const PrototypeSet set = assemble(compute_base_prototypes(gt), Matrix(), {{"stage", "prototypes"}});
        const fs::path out = out_path(cfg, kBasePrototypesFile);
        write_prototypes(out, set);
        m.artifacts = {out};
        m.details = {{"k", set.num_base()}, {"dim", set.dim}, {"gt_records", gt.size()}};
    });
}

StageResult run_discover(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("discover", cfg, [&](Manifest& m) {
        BasePrototypes base;
        if (cfg.variant != PrototypeVariant::AllClusters) {
            const PrototypeSet b = read_prototype_artifact(m, out_path(cfg, kBasePrototypesFile), "base prototypes");
            base.class_ids = b.base_ids;
            base.vectors = b.base;
        }
        std::map<std::string, std::string> meta = {{"variant", variant_name(cfg.variant)}};
        Matrix novel;
        if (cfg.variant == PrototypeVariant::GtOracle) {
            const auto gt = read_records(m, cfg.input(&PipelinePaths::discovery_gt), "discovery GT features");
            const std::set<ClassId> known(base.class_ids.begin(), base.class_ids.end());
            std::vector<FeatureRecord> novel_gt;
            std::copy_if(gt.begin(), gt.end(), std::back_inserter(novel_gt),
                         [&](const FeatureRecord& r) { return r.gt_class && !known.count(*r.gt_class); });
            const BasePrototypes oracle = compute_base_prototypes(novel_gt);
            novel = oracle.vectors;
            std::string ids;
            for (ClassId c : oracle.class_ids) ids += (ids.empty() ? "" : ",") + std::to_string(c);
            meta["oracle_class_ids"] = ids;
            m.details["q"] = oracle.class_ids.size();
        } else {
            std::uint32_t dim = 0;
            const auto rpn = read_records(m, cfg.input(&PipelinePaths::discovery_rpn), "discovery RPN features", &dim);
            if (base.vectors.cols() > 0) check_dim(base.vectors.rows(), dim, "discovery RPN features");
            for (std::size_t i = 0; i < rpn.size(); ++i) {
                if (rpn[i].source != Source::RPN) {
                    throw DomainError("discovery record " + std::to_string(i) + " is not an RPN record");
                }
            }
            const auto fit = kmeans(normalized_feature_matrix(rpn), cfg.kmeans);
            novel = fit.centers;
            meta["kmeans.inertia"] = fmt(fit.inertia);
            m.details = {{"q", cfg.kmeans.q},
                         {"max_iter", cfg.kmeans.max_iter},
                         {"retries", cfg.kmeans.retries},
                         {"iterations_run", fit.iterations_run},
                         {"restart_chosen", fit.restart_chosen},
                         {"inertia", fit.inertia},
                         {"restart_inertias", fit.restart_inertias},
                         {"rpn_records", rpn.size()}};
        }
        const PrototypeSet set = assemble(std::move(base), std::move(novel), std::move(meta));
        const fs::path out = out_path(cfg, kPrototypesFile);
        write_prototypes(out, set);
        m.artifacts = {out};
        m.details["k"] = set.num_base();
        m.details["variant"] = variant_name(cfg.variant);
    });
}

StageResult run_infer(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("infer", cfg, [&](Manifest& m) {
        const PrototypeSet protos = read_prototype_artifact(m, out_path(cfg, kPrototypesFile), "prototypes");
        std::uint32_t dim = 0;
        const auto rpn = read_records(m, cfg.input(&PipelinePaths::test_rpn), "test RPN features", &dim);
        if (!rpn.empty()) check_dim(protos.dim, dim, "test RPN features");

        std::map<ImageId, std::vector<FeatureRecord>> by_image;
        for (const auto& r : rpn) by_image[r.image_id].push_back(r);
        std::vector<const std::vector<FeatureRecord>*> images;
        for (const auto& [id, recs] : by_image) images.push_back(&recs);

        std::vector<std::vector<Detection>> per_image(images.size());
        auto work = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                per_image[i] = postprocess_image(detections_for_image(*images[i], protos, cfg.inference), cfg.postprocess);
            }
        };
        const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.threads, 1)), 1,
                                                            std::max<std::size_t>(images.size(), 1));
        if (workers == 1) {
            work(0, images.size());
        } else {
            std::vector<std::future<void>> jobs;
            const std::size_t chunk = (images.size() + workers - 1) / workers;
            for (std::size_t b = 0; b < images.size(); b += chunk) {
                jobs.push_back(std::async(std::launch::async, work, b, std::min(images.size(), b + chunk)));
            }
            for (auto& j : jobs) j.get();
        }

        std::vector<Detection> dets;
        for (auto& d : per_image) dets.insert(dets.end(), d.begin(), d.end());
        const fs::path out = out_path(cfg, kDetectionsFile);
        write_detections(out, dets);
        m.artifacts = {out};
        m.details = {{"images", images.size()},
                     {"proposals", rpn.size()},
                     {"detections", dets.size()},
                     {"metric", to_string(cfg.inference.metric)},
                     {"background_classifier", cfg.inference.background_classifier}};
    });
}

StageResult run_map(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("map", cfg, [&](Manifest& m) {
        const PrototypeSet protos = read_prototype_artifact(m, out_path(cfg, kPrototypesFile), "prototypes");
        LabelMapping mapping;
        if (cfg.mapping == MappingMethod::Hungarian) {
            std::uint32_t dim = 0;
            const auto gt = read_records(m, cfg.input(&PipelinePaths::test_gt), "test GT annotations", &dim);
            if (!gt.empty()) check_dim(protos.dim, dim, "test GT annotations");
            const std::set<ClassId> known(protos.base_ids.begin(), protos.base_ids.end());
            std::vector<FeatureRecord> novel_gt;
            std::copy_if(gt.begin(), gt.end(), std::back_inserter(novel_gt),
                         [&](const FeatureRecord& r) { return r.gt_class && !known.count(*r.gt_class); });
            const ConfusionCounts counts = build_confusion(novel_gt, protos, cfg.inference.metric);
            mapping = hungarian_assign(counts);
            m.details = {{"gt_features", novel_gt.size()}, {"labels", counts.label_ids.size()}};
        } else {
            std::uint32_t dim = 0;
            const auto rpn = read_records(m, cfg.input(&PipelinePaths::discovery_rpn), "discovery RPN features", &dim);
            check_dim(protos.dim, dim, "discovery RPN features");
            const auto emb = read_records(m, cfg.input(&PipelinePaths::box_embeddings), "box embeddings", nullptr,
                                          kEmbeddingMagic);
            if (emb.size() != rpn.size()) {
                throw DomainError("box embeddings hold " + std::to_string(emb.size()) + " records, discovery RPN holds " +
                                  std::to_string(rpn.size()));
            }
            const fs::path text_path = require(cfg.input(&PipelinePaths::text_embeddings), "text embeddings");
            m.input(text_path);
            const auto texts = read_text_embeddings(text_path);
            std::vector<Vector> box_vectors;
            box_vectors.reserve(emb.size());
            for (const auto& e : emb) box_vectors.push_back(e.feature);
            const auto labels = nearest_text_label(box_vectors, texts);
            const Matrix feats = normalized_feature_matrix(rpn);
            std::vector<LabeledBox> boxes(rpn.size());
            for (std::size_t i = 0; i < rpn.size(); ++i) {
                boxes[i] = {feats.col(static_cast<Eigen::Index>(i)), labels[i]};
            }
            mapping = embedding_assign(protos, boxes, cfg.kappa);
            m.details = {{"boxes", boxes.size()}, {"kappa", cfg.kappa}};
        }
        const fs::path out = out_path(cfg, kMappingFile);
        write_mapping(out, mapping);
        m.artifacts = {out};
        m.details["mapped_clusters"] = mapping.entries.size();
        m.details["clusters"] = protos.num_novel();
    });
}

StageResult run_eval(const PipelineConfig& config) {
    const PipelineConfig cfg = config.resolved();
    return staged("eval", cfg, [&](Manifest& m) {
        const fs::path det_path = require(out_path(cfg, kDetectionsFile), "detections");
        const fs::path map_path = require(out_path(cfg, kMappingFile), "mapping");
        const fs::path cls_path = require(cfg.input(&PipelinePaths::classes), "class table");
        m.input(det_path);
        m.input(map_path);
        m.input(cls_path);
        const auto gt = read_records(m, cfg.input(&PipelinePaths::test_gt), "test GT annotations");
        const ClassTable classes = read_class_table(cls_path);
        const auto mapped = apply_mapping(read_detections(det_path), read_mapping(map_path));
        const auto thresholds = parse_iou_thresholds(cfg.iou_thresholds);
        const EvalReport report = evaluate(mapped, GroundTruthIndex::from_records(gt), thresholds, classes);

        const fs::path mapped_path = out_path(cfg, kMappedDetectionsFile);
        const fs::path report_path = out_path(cfg, kReportFile);
        const fs::path table_path = out_path(cfg, kReportTableFile);
        write_detections(mapped_path, mapped);
        write_jsonl(report_path, report_to_jsonl(report, classes));
        {
            std::ofstream out(table_path, std::ios::trunc);
            if (!out) throw FormatError(FormatError::Kind::Io, "cannot write '" + table_path.string() + "'");
            out << report_to_table(report, classes);
        }
        m.artifacts = {mapped_path, report_path, table_path};
        m.details = {{"map_all", report.map_all}, {"map_base", report.map_base}, {"map_novel", report.map_novel}};
    });
}

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, bool synthesize) {
    std::vector<StageResult> out;
    if (synthesize) out.push_back(run_synth(cfg));
    out.push_back(run_prototypes(cfg));
    out.push_back(run_discover(cfg));
    out.push_back(run_infer(cfg));
    out.push_back(run_map(cfg));
    out.push_back(run_eval(cfg));
    return out;
}

}  // namespace ncd
