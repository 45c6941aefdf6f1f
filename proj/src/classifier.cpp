#include "ncd/classifier.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ncd/error.hpp"

namespace ncd {

Vector LogitVector::stacked() const {
    Vector v(size());
    v(0) = background;
    v.segment(1, per_base.size()) = per_base;
    v.segment(1 + per_base.size(), per_cluster.size()) = per_cluster;
    return v;
}

Scalar background_floor(SimilarityMetric metric) {
    return metric.is_nonnegative() ? Scalar(0) : std::numeric_limits<Scalar>::lowest();
}

LogitVector compute_logits(const FeatureRecord& record, const PrototypeSet& protos, const InferenceConfig& config) {
    if (protos.num_base() + protos.num_novel() == 0) throw DomainError("compute_logits: empty prototype set");
    if (record.feature.size() != protos.dim) {
        throw DomainError("compute_logits: feature dimension " + std::to_string(record.feature.size()) +
                          " differs from prototype dimension " + std::to_string(protos.dim));
    }
    if (config.background_classifier && !record.base_pred) {
        throw DomainError("compute_logits: background classifier enabled but record has no base prediction");
    }
    const Vector f = l2_normalize(record.feature);

    LogitVector out;
    out.per_base = similarities(f, protos.base, config.metric);
    out.per_cluster = similarities(f, protos.novel, config.metric);
    out.background = background_floor(config.metric);
    if (config.background_classifier && record.base_pred->is_background()) {
        Scalar best = std::numeric_limits<Scalar>::lowest();
        if (out.per_base.size() > 0) best = std::max(best, out.per_base.maxCoeff());
        if (out.per_cluster.size() > 0) best = std::max(best, out.per_cluster.maxCoeff());
        out.background = best;
    }
    return out;
}

Vector normalize_probs(const Eigen::Ref<const Vector>& logits, ProbNorm mode) {
    if (logits.size() == 0) throw DomainError("normalize_probs: empty logit vector");
    if (!logits.allFinite()) throw DomainError("normalize_probs: non-finite logit");

    if (mode == ProbNorm::Softmax) {
        const Scalar top = logits.maxCoeff();
        const Vector e = (logits.array() - top).exp().matrix();
        return e / e.sum();
    }

    if (logits.minCoeff() >= 0) {
        const Scalar total = logits.sum();
        if (!(total > 0)) throw DomainError("normalize_probs: all-zero vector under L1");
        return logits / total;
    }

    constexpr Scalar floor = std::numeric_limits<Scalar>::lowest();
    Scalar shift = std::numeric_limits<Scalar>::max();
    Eigen::Index live = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (logits(i) > floor) {
            shift = std::min(shift, logits(i));
            ++live;
        }
    }
    if (live == 0) throw DomainError("normalize_probs: every entry is at the background floor");
    Vector shifted(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) shifted(i) = logits(i) > floor ? logits(i) - shift : Scalar(0);
    const Scalar total = shifted.sum();
    if (total > 0) return shifted / total;
    // all live entries equal: spread mass uniformly over them
    for (Eigen::Index i = 0; i < logits.size(); ++i) shifted(i) = logits(i) > floor ? Scalar(1) / live : Scalar(0);
    return shifted;
}

std::vector<Classified> classify_image(std::span<const FeatureRecord> records, const PrototypeSet& protos,
                                       const InferenceConfig& config) {
    std::vector<Classified> out;
    out.reserve(records.size());
    const auto k = protos.num_base();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.source != Source::RPN) throw DomainError("classify_image: record " + std::to_string(i) + " is not RPN");
        if (r.image_id != records.front().image_id) throw DomainError("classify_image: records span several images");

        const Vector logits = compute_logits(r, protos, config).stacked();
        const Vector probs = normalize_probs(logits, config.prob_norm);
        const Eigen::Index top = argmax_first(logits);

        Classified c;
        c.record_index = i;
        if (top == 0) {
            c.label = Label::background();
        } else if (top <= k) {
            c.label = Label::base(protos.base_ids[top - 1]);
        } else {
            c.label = Label::cluster(static_cast<std::int32_t>(top - 1 - k));
        }
        c.score = std::clamp<Scalar>(probs(top), 0, 1);
        out.push_back(c);
    }
    return out;
}

std::vector<Detection> detections_for_image(std::span<const FeatureRecord> records, const PrototypeSet& protos,
                                            const InferenceConfig& config) {
    std::vector<Detection> dets;
    for (const auto& c : classify_image(records, protos, config)) {
        const auto& r = records[c.record_index];
        dets.push_back({r.image_id, r.box, c.label, c.score});
    }
    return dets;
}

}  // namespace ncd
