#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ncd/types.hpp"
#include "ncd/vecmath.hpp"

namespace ncd {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// counts(r, j): number of GT features of label_ids[r] whose most similar cluster is j.
struct ConfusionCounts {
    std::vector<ClassId> label_ids;  // ascending
    CountMatrix counts;              // labels x clusters
    int cluster_count = 0;

    std::int64_t total() const { return counts.size() ? counts.sum() : 0; }
};

/// Maximum-weight matching between the rows and columns of a nonnegative integer matrix.
///
/// Solved as Kuhn-Munkres on the zero-padded square matrix with exact integer potentials.
/// Among all optimal matchings the row-lexicographically smallest one is returned.
/// Result: per row, the matched column or -1; zero-weight pairs are reported as -1.
std::vector<int> max_weight_matching(const CountMatrix& weights);

/// Most similar cluster (ties to the lowest index) of every L2-normalized GT feature, accumulated per label.
ConfusionCounts build_confusion(std::span<const FeatureRecord> gt_novel, const PrototypeSet& protos,
                                SimilarityMetric metric);

LabelMapping hungarian_assign(const ConfusionCounts& counts);

struct LabeledBox {
    Vector feature;
    ClassId embedding_label = 0;
};

/// Each box joins its nearest cluster; a cluster takes the mode of the labels of its
/// kappa nearest members (ties to the lowest class id). Clusters with no members stay unmapped.
LabelMapping embedding_assign(const PrototypeSet& protos, std::span<const LabeledBox> boxes, int kappa);

/// Cosine-nearest text embedding of every box embedding (ties to the lowest class id).
std::vector<ClassId> nearest_text_label(std::span<const Vector> box_embeddings,
                                        std::span<const TextEmbedding> text_embeddings);

/// Base(c) -> Mapped(c); Cluster(j) -> Mapped(mapping[j]) or UnmappedNovel(j). Other labels pass through.
std::vector<Detection> apply_mapping(std::vector<Detection> dets, const LabelMapping& mapping);

}  // namespace ncd
