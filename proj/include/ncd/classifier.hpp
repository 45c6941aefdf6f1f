#pragma once

#include <span>
#include <vector>

#include "ncd/types.hpp"
#include "ncd/vecmath.hpp"

namespace ncd {

enum class ProbNorm { L1, Softmax };

struct InferenceConfig {
    SimilarityMetric metric = SimilarityMetric::inv_sq_euclidean(2);
    ProbNorm prob_norm = ProbNorm::L1;
    bool background_classifier = true;
};

/// Ordered as [background, K base prototypes, Q clusters].
struct LogitVector {
    Scalar background = 0;
    Vector per_base;
    Vector per_cluster;

    Eigen::Index size() const noexcept { return 1 + per_base.size() + per_cluster.size(); }
    Vector stacked() const;
};

/// Background logit used when the background rule does not fire:
/// 0 for InvSqEuclidean (every similarity is positive), lowest finite value for signed metrics.
Scalar background_floor(SimilarityMetric metric);

LogitVector compute_logits(const FeatureRecord& record, const PrototypeSet& protos, const InferenceConfig& config);

/// Converts a logit vector to a probability vector summing to one; argmax is preserved.
///
/// L1 on vectors with negative entries shifts by the smallest non-floor entry first;
/// entries at the signed background floor carry zero mass.
Vector normalize_probs(const Eigen::Ref<const Vector>& logits, ProbNorm mode);

struct Classified {
    std::size_t record_index = 0;
    Label label;  // Background, Base(class id) or Cluster(j)
    Scalar score = 0;
};

/// Labels every RPN record of one image. Ties in the argmax go to the lowest index.
std::vector<Classified> classify_image(std::span<const FeatureRecord> records, const PrototypeSet& protos,
                                       const InferenceConfig& config);

/// classify_image wrapped into detections (including Background ones).
std::vector<Detection> detections_for_image(std::span<const FeatureRecord> records, const PrototypeSet& protos,
                                            const InferenceConfig& config);

}  // namespace ncd
