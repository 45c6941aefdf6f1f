#include "ncd/vecmath.hpp"

namespace ncd {

std::string to_string(SimilarityMetric metric) {
    switch (metric.kind) {
        case SimilarityMetric::Kind::InvSqEuclidean:
            return "inv_sq_euclidean(gamma=" + std::to_string(metric.gamma) + ")";
        case SimilarityMetric::Kind::DotProduct:
            return "dot_product";
        case SimilarityMetric::Kind::Cosine:
            return "cosine";
    }
    return "unknown";
}

SimilarityMetric similarity_metric_from_string(const std::string& name, int gamma) {
    if (name == "inv_sq_euclidean") {
        if (gamma <= 0) throw DomainError("similarity metric: gamma must be positive");
        return SimilarityMetric::inv_sq_euclidean(gamma);
    }
    if (name == "dot_product") return SimilarityMetric::dot_product();
    if (name == "cosine") return SimilarityMetric::cosine();
    throw DomainError("unknown similarity metric '" + name + "'");
}

}  // namespace ncd
