#include "ncd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ncd/error.hpp"

namespace ncd {
namespace {

struct Option {
    std::string key;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    char buf[40];
    const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    return {buf, end};
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        T v{};
        if constexpr (std::is_same_v<T, double>) {
            v = std::stod(text, &used);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
            v = std::stoull(text, &used);
        } else {
            v = static_cast<T>(std::stoll(text, &used));
        }
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("option '" + key + "': cannot parse '" + text + "' as a number");
    }
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("option '" + key + "': expected true/false, got '" + text + "'");
}

template <typename E>
struct EnumNames {
    std::vector<std::pair<E, std::string>> names;

    std::string name(E e) const {
        for (const auto& [v, n] : names) {
            if (v == e) return n;
        }
        return "?";
    }
    E parse(const std::string& key, const std::string& text) const {
        std::string allowed;
        for (const auto& [v, n] : names) {
            if (n == text) return v;
            allowed += (allowed.empty() ? "" : "|") + n;
        }
        throw ConfigError("option '" + key + "': expected one of " + allowed + ", got '" + text + "'");
    }
};

const EnumNames<PrototypeVariant> kVariants{
    {{PrototypeVariant::Default, "default"}, {PrototypeVariant::AllClusters, "all_clusters"}, {PrototypeVariant::GtOracle, "gt_oracle"}}};
const EnumNames<KMeansInit> kInits{{{KMeansInit::RandomSample, "random"}, {KMeansInit::PlusPlus, "kmeans++"}}};
const EnumNames<SimilarityMetric::Kind> kMetrics{{{SimilarityMetric::Kind::InvSqEuclidean, "inv_sq_euclidean"},
                                                  {SimilarityMetric::Kind::DotProduct, "dot_product"},
                                                  {SimilarityMetric::Kind::Cosine, "cosine"}}};
const EnumNames<ProbNorm> kNorms{{{ProbNorm::L1, "l1"}, {ProbNorm::Softmax, "softmax"}}};
const EnumNames<MappingMethod> kMappings{{{MappingMethod::Hungarian, "hungarian"}, {MappingMethod::Embedding, "embedding"}}};
const EnumNames<LabelDistribution> kDistributions{{{LabelDistribution::Uniform, "uniform"}, {LabelDistribution::LongTailed, "zipf"}}};

template <typename T, typename M>
Option number(std::string key, M member) {
    return {key,
            [member](const PipelineConfig& c) {
                if constexpr (std::is_same_v<T, double>) {
                    return fmt_double(std::invoke(member, c));
                } else {
                    return std::to_string(std::invoke(member, c));
                }
            },
            [member, key](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = parse_number<T>(key, v); }};
}

template <typename M>
Option boolean(std::string key, M member) {
    return {key, [member](const PipelineConfig& c) { return std::string(std::invoke(member, c) ? "true" : "false"); },
            [member, key](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = parse_bool(key, v); }};
}

template <typename M>
Option path(std::string key, M member) {
    return {key, [member](const PipelineConfig& c) { return std::invoke(member, c).string(); },
            [member](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = v; }};
}

template <typename E, typename M>
Option enumeration(std::string key, M member, const EnumNames<E>& names) {
    return {key, [member, &names](const PipelineConfig& c) { return names.name(std::invoke(member, c)); },
            [member, key, &names](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = names.parse(key, v); }};
}

// Member accessors through nested structs.
#define NCD_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Option>& options() {
    static const std::vector<Option> table = {
        {"run.preset", [](const PipelineConfig& c) { return c.preset; },
         [](PipelineConfig& c, const std::string& v) {
             if (v != "voc" && v != "lvis") throw ConfigError("option 'run.preset': expected voc|lvis, got '" + v + "'");
             c.preset = v;
         }},
        number<std::uint64_t>("run.seed", NCD_FIELD(seed)),
        number<int>("run.threads", NCD_FIELD(threads)),
        path("paths.data_dir", NCD_FIELD(paths.data_dir)),
        path("paths.base_gt", NCD_FIELD(paths.base_gt)),
        path("paths.discovery_rpn", NCD_FIELD(paths.discovery_rpn)),
        path("paths.discovery_gt", NCD_FIELD(paths.discovery_gt)),
        path("paths.test_rpn", NCD_FIELD(paths.test_rpn)),
        path("paths.test_gt", NCD_FIELD(paths.test_gt)),
        path("paths.classes", NCD_FIELD(paths.classes)),
        path("paths.box_embeddings", NCD_FIELD(paths.box_embeddings)),
        path("paths.text_embeddings", NCD_FIELD(paths.text_embeddings)),
        path("paths.output_dir", NCD_FIELD(paths.output_dir)),
        enumeration("prototypes.variant", NCD_FIELD(variant), kVariants),
        number<int>("kmeans.q", NCD_FIELD(kmeans.q)),
        number<int>("kmeans.max_iter", NCD_FIELD(kmeans.max_iter)),
        number<int>("kmeans.retries", NCD_FIELD(kmeans.retries)),
        number<double>("kmeans.tol", NCD_FIELD(kmeans.tol)),
        enumeration("kmeans.init", NCD_FIELD(kmeans.init), kInits),
        enumeration("inference.metric", NCD_FIELD(inference.metric.kind), kMetrics),
        number<int>("inference.gamma", NCD_FIELD(inference.metric.gamma)),
        enumeration("inference.prob_norm", NCD_FIELD(inference.prob_norm), kNorms),
        boolean("inference.background_classifier", NCD_FIELD(inference.background_classifier)),
        number<double>("postprocess.score_threshold", NCD_FIELD(postprocess.score_threshold)),
        number<double>("postprocess.nms_iou", NCD_FIELD(postprocess.nms_iou)),
        number<int>("postprocess.top_m", NCD_FIELD(postprocess.top_m)),
        boolean("postprocess.drop_background", NCD_FIELD(postprocess.drop_background)),
        enumeration("mapping.method", NCD_FIELD(mapping), kMappings),
        number<int>("mapping.kappa", NCD_FIELD(kappa)),
        {"eval.iou_thresholds", [](const PipelineConfig& c) { return c.iou_thresholds; },
         [](PipelineConfig& c, const std::string& v) { c.iou_thresholds = v; }},
        number<int>("synth.dim", NCD_FIELD(synth.dim)),
        number<int>("synth.n_base", NCD_FIELD(synth.n_base)),
        number<int>("synth.n_novel", NCD_FIELD(synth.n_novel)),
        number<double>("synth.min_angle_deg", NCD_FIELD(synth.min_angle_deg)),
        number<double>("synth.sigma", NCD_FIELD(synth.sigma)),
        number<int>("synth.samples_per_class", NCD_FIELD(synth.samples_per_class)),
        number<double>("synth.clutter_fraction", NCD_FIELD(synth.clutter_fraction)),
        number<double>("synth.mislocalized_share", NCD_FIELD(synth.mislocalized_share)),
        number<double>("synth.clutter_sigma", NCD_FIELD(synth.clutter_sigma)),
        number<int>("synth.objects_per_image", NCD_FIELD(synth.objects_per_image)),
        number<double>("synth.discovery_base_fraction", NCD_FIELD(synth.discovery_base_fraction)),
        number<double>("synth.flip_prob", NCD_FIELD(synth.flip_prob)),
        enumeration("synth.distribution", NCD_FIELD(synth.distribution), kDistributions),
        number<double>("synth.zipf_s", NCD_FIELD(synth.zipf_s)),
        number<int>("synth.embedding_dim", NCD_FIELD(synth.embedding_dim)),
        number<double>("synth.embedding_sigma", NCD_FIELD(synth.embedding_sigma)),
    };
    return table;
}

#undef NCD_FIELD

std::vector<ConfigOverride> parse_ini(std::istream& in, const std::string& origin) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    std::vector<ConfigOverride> entries;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            entries.emplace_back("run." + section, body.data());
            continue;
        }
        for (const auto& [key, value] : body) entries.emplace_back(section + "." + key, value.data());
    }
    return entries;
}

PipelineConfig build(const std::vector<ConfigOverride>& file_entries, const std::vector<ConfigOverride>& overrides,
                     const std::optional<std::string>& preset) {
    PipelineConfig cfg;
    std::string chosen = "voc";
    for (const auto& [k, v] : file_entries) {
        if (k == "run.preset") chosen = v;
    }
    if (preset) chosen = *preset;
    apply_preset(cfg, chosen);
    for (const auto& [k, v] : file_entries) {
        if (k != "run.preset") set_option(cfg, k, v);
    }
    for (const auto& [k, v] : overrides) set_option(cfg, k, v);
    return cfg;
}

}  // namespace

std::filesystem::path PipelineConfig::input(const std::filesystem::path PipelinePaths::*member) const {
    const auto& explicit_path = paths.*member;
    if (!explicit_path.empty()) return explicit_path;
    const auto dir = paths.data_dir.empty() ? paths.output_dir / "world" : paths.data_dir;
    const WorldFiles files = world_files(dir);
    if (member == &PipelinePaths::base_gt) return files.base_gt;
    if (member == &PipelinePaths::discovery_rpn) return files.discovery_rpn;
    if (member == &PipelinePaths::discovery_gt) return files.discovery_gt;
    if (member == &PipelinePaths::test_rpn) return files.test_rpn;
    if (member == &PipelinePaths::test_gt) return files.test_gt;
    if (member == &PipelinePaths::classes) return files.classes;
    if (member == &PipelinePaths::box_embeddings) return files.box_embeddings;
    if (member == &PipelinePaths::text_embeddings) return files.text_embeddings;
    return dir;
}

PipelineConfig PipelineConfig::resolved() const {
    PipelineConfig c = *this;
    c.kmeans.seed = seed;
    c.kmeans.threads = threads;
    c.synth.seed = seed;
    return c;
}

void apply_preset(PipelineConfig& cfg, const std::string& preset) {
    const int q = cfg.kmeans.q;
    if (preset == "voc") {
        const auto keep = cfg.kmeans;
        cfg.kmeans = KMeansConfig::voc(q);
        cfg.kmeans.tol = keep.tol;
        cfg.kmeans.init = keep.init;
        cfg.postprocess = PostprocessConfig::voc();
    } else if (preset == "lvis") {
        const auto keep = cfg.kmeans;
        cfg.kmeans = KMeansConfig::lvis(q);
        cfg.kmeans.tol = keep.tol;
        cfg.kmeans.init = keep.init;
        cfg.postprocess = PostprocessConfig::lvis();
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected voc|lvis)");
    }
    cfg.preset = preset;
}

void set_option(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& opt : options()) {
        if (opt.key == key) {
            opt.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown option '" + key + "'");
}

std::vector<ConfigOverride> config_entries(const PipelineConfig& cfg) {
    std::vector<ConfigOverride> out;
    for (const auto& opt : options()) out.emplace_back(opt.key, opt.get(cfg));
    return out;
}

PipelineConfig parse_config_text(const std::string& text, const std::vector<ConfigOverride>& overrides,
                                 const std::optional<std::string>& preset) {
    std::istringstream in(text);
    return build(parse_ini(in, "<config>"), overrides, preset);
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<ConfigOverride>& overrides,
                           const std::optional<std::string>& preset) {
    std::vector<ConfigOverride> entries;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw MissingInputError("cannot open config file '" + file->string() + "'");
        entries = parse_ini(in, file->string());
    }
    return build(entries, overrides, preset);
}

std::string config_to_text(const PipelineConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& [key, value] : config_entries(cfg)) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << '\n';
            os << '[' << sec << "]\n";
            section = sec;
        }
        os << key.substr(dot + 1) << " = " << value << '\n';
    }
    return os.str();
}

}  // namespace ncd
