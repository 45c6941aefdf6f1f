#include "ncd/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ncd/error.hpp"

namespace ncd {

bool BoxGeometry::valid() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0 && h > 0;
}

bool operator==(const FeatureRecord& a, const FeatureRecord& b) {
    return a.image_id == b.image_id && a.box == b.box && a.source == b.source && a.base_pred == b.base_pred &&
           a.objectness == b.objectness && a.gt_class == b.gt_class && a.feature.size() == b.feature.size() &&
           a.feature == b.feature;
}

void PrototypeSet::validate() const {
    if (base.rows() != dim && base.cols() > 0) throw DomainError("PrototypeSet: base prototype dimension mismatch");
    if (novel.rows() != dim && novel.cols() > 0) throw DomainError("PrototypeSet: novel prototype dimension mismatch");
    if (static_cast<Eigen::Index>(base_ids.size()) != base.cols()) {
        throw DomainError("PrototypeSet: base id count does not match base prototypes");
    }
    if (base.cols() + novel.cols() < 1) throw DomainError("PrototypeSet: needs at least one prototype");
    if (base.cols() > 0 && !base.allFinite()) throw DomainError("PrototypeSet: non-finite base prototype");
    if (novel.cols() > 0 && !novel.allFinite()) throw DomainError("PrototypeSet: non-finite novel prototype");
    for (std::size_t i = 1; i < base_ids.size(); ++i) {
        if (base_ids[i] <= base_ids[i - 1]) throw DomainError("PrototypeSet: base class ids must be strictly ascending");
    }
}

std::string to_string(LabelKind kind) {
    switch (kind) {
        case LabelKind::Background: return "background";
        case LabelKind::Base: return "base";
        case LabelKind::Cluster: return "cluster";
        case LabelKind::Mapped: return "mapped";
        case LabelKind::UnmappedNovel: return "unmapped";
    }
    return "?";
}

LabelKind label_kind_from_string(const std::string& s) {
    if (s == "background") return LabelKind::Background;
    if (s == "base") return LabelKind::Base;
    if (s == "cluster") return LabelKind::Cluster;
    if (s == "mapped") return LabelKind::Mapped;
    if (s == "unmapped") return LabelKind::UnmappedNovel;
    throw FormatError(FormatError::Kind::Invalid, "unknown label kind '" + s + "'");
}

std::string to_string(FrequencySplit s) {
    switch (s) {
        case FrequencySplit::Frequent: return "frequent";
        case FrequencySplit::Common: return "common";
        case FrequencySplit::Rare: return "rare";
    }
    return "?";
}

std::optional<ClassId> LabelMapping::lookup(std::int32_t cluster) const {
    if (auto it = entries.find(cluster); it != entries.end()) return it->second;
    return std::nullopt;
}

const ClassEval* EvalReport::find(ClassId id) const {
    auto it = std::find_if(per_class.begin(), per_class.end(), [id](const ClassEval& c) { return c.id == id; });
    return it == per_class.end() ? nullptr : &*it;
}

}  // namespace ncd
