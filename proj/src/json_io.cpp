#include "ncd/json_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ncd/error.hpp"

namespace ncd {
namespace {

using Kind = FormatError::Kind;

json vector_to_json(const Eigen::Ref<const Vector>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& arr) {
    if (!arr.is_array()) throw FormatError(Kind::Invalid, "expected a numeric array");
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw FormatError(Kind::Invalid, "non-numeric vector entry");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    if (!v.allFinite()) throw FormatError(Kind::NonFinite, "non-finite vector entry");
    return v;
}

template <typename T>
T field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(Kind::Invalid, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw FormatError(Kind::Invalid, std::string("bad field '") + key + "': " + e.what());
    }
}

std::string to_string(ClassKind k) { return k == ClassKind::Base ? "base" : "novel"; }

ClassKind class_kind_from_string(const std::string& s) {
    if (s == "base") return ClassKind::Base;
    if (s == "novel") return ClassKind::Novel;
    throw FormatError(Kind::Invalid, "unknown class kind '" + s + "'");
}

const ClassInfo* find_class(const ClassTable& table, ClassId id) {
    auto it = std::find_if(table.begin(), table.end(), [id](const ClassInfo& c) { return c.id == id; });
    return it == table.end() ? nullptr : &*it;
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open '" + path.string() + "'");
    std::vector<json> lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw FormatError(Kind::Invalid, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return lines;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError(Kind::Io, "cannot open '" + path.string() + "' for writing");
    for (const auto& j : lines) out << j.dump() << '\n';
    if (!out) throw FormatError(Kind::Io, "write failed for '" + path.string() + "'");
}

std::vector<json> prototypes_to_jsonl(const PrototypeSet& set) {
    std::vector<json> lines;
    json meta = json::object();
    for (const auto& [k, v] : set.metadata) meta[k] = v;
    lines.push_back({{"type", "header"},
                     {"dim", set.dim},
                     {"k", set.num_base()},
                     {"q", set.num_novel()},
                     {"metadata", meta}});
    for (Eigen::Index c = 0; c < set.num_base(); ++c) {
        lines.push_back({{"type", "base"}, {"class_id", set.base_ids[c]}, {"vector", vector_to_json(set.base.col(c))}});
    }
    for (Eigen::Index j = 0; j < set.num_novel(); ++j) {
        lines.push_back({{"type", "novel"}, {"index", j}, {"vector", vector_to_json(set.novel.col(j))}});
    }
    return lines;
}

PrototypeSet prototypes_from_jsonl(const std::vector<json>& lines) {
    if (lines.empty() || field<std::string>(lines.front(), "type") != "header") {
        throw FormatError(Kind::Invalid, "prototype file must start with a header line");
    }
    const json& header = lines.front();
    PrototypeSet set;
    set.dim = field<Eigen::Index>(header, "dim");
    const auto k = field<Eigen::Index>(header, "k");
    const auto q = field<Eigen::Index>(header, "q");
    if (auto it = header.find("metadata"); it != header.end()) {
        for (const auto& [key, value] : it->items()) set.metadata[key] = value.get<std::string>();
    }
    if (static_cast<Eigen::Index>(lines.size()) != 1 + k + q) {
        throw FormatError(Kind::Truncated, "prototype file declares " + std::to_string(k + q) + " vectors but has " +
                                               std::to_string(lines.size() - 1));
    }
    set.base.resize(set.dim, k);
    set.novel.resize(set.dim, q);
    Eigen::Index nb = 0;
    Eigen::Index nn = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto type = field<std::string>(lines[i], "type");
        const Vector v = vector_from_json(field<json>(lines[i], "vector"));
        if (v.size() != set.dim) throw FormatError(Kind::Invalid, "prototype dimension differs from header");
        if (type == "base" && nb < k) {
            set.base_ids.push_back(field<ClassId>(lines[i], "class_id"));
            set.base.col(nb++) = v;
        } else if (type == "novel" && nn < q) {
            if (field<Eigen::Index>(lines[i], "index") != nn) throw FormatError(Kind::Invalid, "novel index out of order");
            set.novel.col(nn++) = v;
        } else {
            throw FormatError(Kind::Invalid, "unexpected prototype line of type '" + type + "'");
        }
    }
    try {
        set.validate();
    } catch (const DomainError& e) {
        throw FormatError(Kind::Invalid, e.what());
    }
    return set;
}

void write_prototypes(const std::filesystem::path& path, const PrototypeSet& set) {
    write_jsonl(path, prototypes_to_jsonl(set));
}

PrototypeSet read_prototypes(const std::filesystem::path& path) {
    try {
        return prototypes_from_jsonl(read_jsonl(path));
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

json detection_to_json(const Detection& d) {
    return {{"image_id", d.image_id},
            {"box", {d.box.x, d.box.y, d.box.w, d.box.h}},
            {"label", {{"kind", to_string(d.label.kind)}, {"id", d.label.id}}},
            {"score", d.score}};
}

Detection detection_from_json(const json& j) {
    Detection d;
    d.image_id = field<ImageId>(j, "image_id");
    const auto box = field<std::vector<double>>(j, "box");
    if (box.size() != 4) throw FormatError(Kind::Invalid, "box must have 4 entries");
    d.box = {box[0], box[1], box[2], box[3]};
    const json& label = field<json>(j, "label");
    d.label = {label_kind_from_string(field<std::string>(label, "kind")), field<std::int32_t>(label, "id")};
    d.score = field<double>(j, "score");
    if (!(d.score >= 0 && d.score <= 1)) throw FormatError(Kind::Invalid, "detection score outside [0,1]");
    return d;
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
    std::vector<json> lines;
    lines.reserve(dets.size());
    for (const auto& d : dets) lines.push_back(detection_to_json(d));
    write_jsonl(path, lines);
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
    std::vector<Detection> dets;
    for (const auto& j : read_jsonl(path)) dets.push_back(detection_from_json(j));
    return dets;
}

void write_mapping(const std::filesystem::path& path, const LabelMapping& mapping) {
    std::vector<json> lines;
    lines.push_back({{"type", "header"},
                     {"method", mapping.method == MappingMethod::Hungarian ? "hungarian" : "embedding"},
                     {"kappa", mapping.kappa}});
    for (const auto& [cluster, cls] : mapping.entries) {
        lines.push_back({{"type", "entry"}, {"cluster", cluster}, {"class_id", cls}});
    }
    write_jsonl(path, lines);
}

LabelMapping read_mapping(const std::filesystem::path& path) {
    const auto lines = read_jsonl(path);
    if (lines.empty() || field<std::string>(lines.front(), "type") != "header") {
        throw FormatError(Kind::Invalid, path.string() + ": mapping file must start with a header line");
    }
    LabelMapping m;
    const auto method = field<std::string>(lines.front(), "method");
    if (method == "hungarian") {
        m.method = MappingMethod::Hungarian;
    } else if (method == "embedding") {
        m.method = MappingMethod::Embedding;
    } else {
        throw FormatError(Kind::Invalid, "unknown mapping method '" + method + "'");
    }
    m.kappa = field<int>(lines.front(), "kappa");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        m.entries[field<std::int32_t>(lines[i], "cluster")] = field<ClassId>(lines[i], "class_id");
    }
    return m;
}

void write_class_table(const std::filesystem::path& path, const ClassTable& table) {
    std::vector<json> lines;
    for (const auto& c : table) lines.push_back({{"id", c.id}, {"name", c.name}, {"kind", to_string(c.kind)}});
    write_jsonl(path, lines);
}

ClassTable read_class_table(const std::filesystem::path& path) {
    ClassTable table;
    for (const auto& j : read_jsonl(path)) {
        table.push_back({field<ClassId>(j, "id"), field<std::string>(j, "name"),
                         class_kind_from_string(field<std::string>(j, "kind"))});
    }
    std::sort(table.begin(), table.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].id == table[i - 1].id) throw FormatError(Kind::Invalid, "duplicate class id in class table");
    }
    return table;
}

void write_text_embeddings(const std::filesystem::path& path, const std::vector<TextEmbedding>& texts) {
    std::vector<json> lines;
    for (const auto& t : texts) lines.push_back({{"class_id", t.class_id}, {"embedding", vector_to_json(t.embedding)}});
    write_jsonl(path, lines);
}

std::vector<TextEmbedding> read_text_embeddings(const std::filesystem::path& path) {
    std::vector<TextEmbedding> texts;
    for (const auto& j : read_jsonl(path)) {
        texts.push_back({field<ClassId>(j, "class_id"), vector_from_json(field<json>(j, "embedding"))});
    }
    return texts;
}

std::vector<json> report_to_jsonl(const EvalReport& report, const ClassTable& classes) {
    std::vector<json> lines;
    json summary = {{"type", "summary"},
                    {"iou_thresholds", report.iou_thresholds},
                    {"map_all", report.map_all},
                    {"map_base", report.map_base},
                    {"map_novel", report.map_novel},
                    {"map_frequent", optional_to_json(report.map_frequent)},
                    {"map_common", optional_to_json(report.map_common)},
                    {"map_rare", optional_to_json(report.map_rare)}};
    lines.push_back(summary);
    for (const auto& c : report.per_class) {
        const ClassInfo* info = find_class(classes, c.id);
        lines.push_back({{"type", "class"},
                         {"class_id", c.id},
                         {"name", info ? info->name : std::to_string(c.id)},
                         {"kind", to_string(c.kind)},
                         {"split", to_string(c.split)},
                         {"ap", c.ap},
                         {"ap_per_iou", c.ap_per_iou},
                         {"gt_instances", c.gt_instances},
                         {"gt_images", c.gt_images}});
    }
    if (report.class_agnostic) {
        const auto& m = *report.class_agnostic;
        lines.push_back({{"type", "class_agnostic"},
                         {"any_label", m.any_label},
                         {"novel_as_novel", m.novel_as_novel},
                         {"base_gt_as_novel", m.base_gt_as_novel},
                         {"novel_gt_as_base", m.novel_gt_as_base}});
    }
    return lines;
}

std::string report_to_table(const EvalReport& report, const ClassTable& classes) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-6s %-20s %-6s %-9s %8s %8s %8s\n", "id", "name", "kind", "split", "gt",
                  "images", "AP");
    os << buf;
    for (const auto& c : report.per_class) {
        const ClassInfo* info = find_class(classes, c.id);
        const std::string name = info ? info->name : std::to_string(c.id);
        std::snprintf(buf, sizeof buf, "%-6d %-20.20s %-6s %-9s %8zu %8zu %8.4f\n", c.id, name.c_str(),
                      to_string(c.kind).c_str(), to_string(c.split).c_str(), c.gt_instances, c.gt_images, c.ap);
        os << buf;
    }
    os << '\n';
    auto line = [&](const char* name, const std::optional<double>& v) {
        if (v) {
            std::snprintf(buf, sizeof buf, "%-14s %8.4f\n", name, *v);
        } else {
            std::snprintf(buf, sizeof buf, "%-14s %8s\n", name, "-");
        }
        os << buf;
    };
    std::string thr;
    for (std::size_t i = 0; i < report.iou_thresholds.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.2f", i ? "," : "", report.iou_thresholds[i]);
        thr += buf;
    }
    os << "iou thresholds: " << thr << '\n';
    line("mAP all", report.map_all);
    line("mAP base", report.map_base);
    line("mAP novel", report.map_novel);
    line("mAP frequent", report.map_frequent);
    line("mAP common", report.map_common);
    line("mAP rare", report.map_rare);
    if (report.class_agnostic) {
        const auto& m = *report.class_agnostic;
        os << '\n';
        line("AP any-label", m.any_label);
        line("AP novel/novel", m.novel_as_novel);
        line("AP base->novel", m.base_gt_as_novel);
        line("AP novel->base", m.novel_gt_as_base);
    }
    return os.str();
}

}  // namespace ncd
