#include "ncd/prototypes.hpp"

#include <map>
#include <string>

#include "ncd/error.hpp"
#include "ncd/vecmath.hpp"

namespace ncd {
namespace {

Vector normalized_or_throw(const FeatureRecord& r, std::size_t index) {
    try {
        return l2_normalize(r.feature);
    } catch (const DomainError& e) {
        throw DomainError("record " + std::to_string(index) + " (image " + std::to_string(r.image_id) +
                          "): " + e.what());
    }
}

}  // namespace

BasePrototypes compute_base_prototypes(std::span<const FeatureRecord> gt_records) {
    std::map<ClassId, std::pair<Vector, std::size_t>> sums;
    Eigen::Index dim = -1;
    for (std::size_t i = 0; i < gt_records.size(); ++i) {
        const auto& r = gt_records[i];
        if (r.source != Source::GT || !r.gt_class) {
            throw DomainError("record " + std::to_string(i) + ": base prototypes need GT records with gt_class");
        }
        if (dim < 0) dim = r.feature.size();
        if (r.feature.size() != dim) throw DomainError("record " + std::to_string(i) + ": dimension mismatch");
        const Vector f = normalized_or_throw(r, i);
        auto [it, inserted] = sums.try_emplace(*r.gt_class, Vector::Zero(dim), 0);
        it->second.first += f;
        ++it->second.second;
    }

    BasePrototypes out;
    out.vectors.resize(std::max<Eigen::Index>(dim, 0), static_cast<Eigen::Index>(sums.size()));
    Eigen::Index c = 0;
    for (const auto& [id, acc] : sums) {
        out.class_ids.push_back(id);
        out.vectors.col(c++) = acc.first / static_cast<Scalar>(acc.second);
    }
    return out;
}

Matrix normalized_feature_matrix(std::span<const FeatureRecord> records) {
    if (records.empty()) return {};
    const Eigen::Index dim = records.front().feature.size();
    Matrix m(dim, static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].feature.size() != dim) throw DomainError("record " + std::to_string(i) + ": dimension mismatch");
        m.col(static_cast<Eigen::Index>(i)) = normalized_or_throw(records[i], i);
    }
    return m;
}

Matrix discover_novel_prototypes(std::span<const FeatureRecord> rpn_records, const KMeansConfig& config) {
    for (std::size_t i = 0; i < rpn_records.size(); ++i) {
        if (rpn_records[i].source != Source::RPN) {
            throw DomainError("record " + std::to_string(i) + ": discovery expects RPN records");
        }
    }
    const Matrix points = normalized_feature_matrix(rpn_records);
    return kmeans(points, config).centers;
}

PrototypeSet assemble(BasePrototypes base, Matrix novel, std::map<std::string, std::string> metadata) {
    PrototypeSet set;
    const Eigen::Index base_dim = base.vectors.cols() > 0 ? base.vectors.rows() : -1;
    const Eigen::Index novel_dim = novel.cols() > 0 ? novel.rows() : -1;
    if (base_dim >= 0 && novel_dim >= 0 && base_dim != novel_dim) {
        throw DomainError("assemble: base dimension " + std::to_string(base_dim) + " differs from novel dimension " +
                          std::to_string(novel_dim));
    }
    set.dim = std::max(base_dim, novel_dim);
    set.base_ids = std::move(base.class_ids);
    set.base = std::move(base.vectors);
    set.novel = std::move(novel);
    if (set.base.cols() == 0) set.base.resize(set.dim, 0);
    if (set.novel.cols() == 0) set.novel.resize(set.dim, 0);
    set.metadata = std::move(metadata);
    set.validate();
    return set;
}

}  // namespace ncd
