#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ncd/kmeans.hpp"
#include "ncd/types.hpp"

namespace ncd {

struct BasePrototypes {
    std::vector<ClassId> class_ids;  // ascending
    Matrix vectors;                  // dim x K, column c belongs to class_ids[c]
};

/// Per-class mean of L2-normalized GT features. The mean is not renormalized.
BasePrototypes compute_base_prototypes(std::span<const FeatureRecord> gt_records);

/// k-means centers (dim x Q) over the L2-normalized RPN features.
Matrix discover_novel_prototypes(std::span<const FeatureRecord> rpn_records, const KMeansConfig& config);

/// Stacks L2-normalized features column-wise. Throws DomainError naming the first zero-norm record.
Matrix normalized_feature_matrix(std::span<const FeatureRecord> records);

PrototypeSet assemble(BasePrototypes base, Matrix novel, std::map<std::string, std::string> metadata = {});

}  // namespace ncd
