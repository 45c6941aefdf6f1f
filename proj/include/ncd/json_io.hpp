#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncd/types.hpp"

namespace ncd {

// Line-delimited JSON artifacts. One object per line; every file starts with a
// {"type": "..."} discriminated header or uses per-line "type" tags, see below.
//
// prototypes.jsonl
//   {"type":"header","dim":D,"k":K,"q":Q,"metadata":{...}}
//   {"type":"base","class_id":c,"vector":[...]}      K lines, ascending class_id
//   {"type":"novel","index":j,"vector":[...]}        Q lines, ascending index
// detections.jsonl
//   {"image_id":i,"box":[x,y,w,h],"label":{"kind":"cluster","id":j},"score":s}
// mapping.jsonl
//   {"type":"header","method":"hungarian"|"embedding","kappa":k}
//   {"type":"entry","cluster":j,"class_id":c}
// classes.jsonl
//   {"id":c,"name":"...","kind":"base"|"novel"}
// text embeddings (sidecar of an NCDE box-embedding file)
//   {"class_id":c,"embedding":[...]}

using nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);

std::vector<json> prototypes_to_jsonl(const PrototypeSet& set);
PrototypeSet prototypes_from_jsonl(const std::vector<json>& lines);
void write_prototypes(const std::filesystem::path& path, const PrototypeSet& set);
PrototypeSet read_prototypes(const std::filesystem::path& path);

json detection_to_json(const Detection& d);
Detection detection_from_json(const json& j);
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);

void write_mapping(const std::filesystem::path& path, const LabelMapping& mapping);
LabelMapping read_mapping(const std::filesystem::path& path);

void write_class_table(const std::filesystem::path& path, const ClassTable& table);
ClassTable read_class_table(const std::filesystem::path& path);

void write_text_embeddings(const std::filesystem::path& path, const std::vector<TextEmbedding>& texts);
std::vector<TextEmbedding> read_text_embeddings(const std::filesystem::path& path);

std::vector<json> report_to_jsonl(const EvalReport& report, const ClassTable& classes);
/// Aligned plain-text rendering of a report.
std::string report_to_table(const EvalReport& report, const ClassTable& classes);

}  // namespace ncd
