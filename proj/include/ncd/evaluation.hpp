#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncd/types.hpp"

namespace ncd {

struct GtBox {
    ImageId image_id = 0;
    ClassId class_id = 0;
    BoxGeometry box;
};

/// Ground-truth boxes grouped per image, with per-class instance and image counts.
class GroundTruthIndex {
public:
    GroundTruthIndex() = default;
    explicit GroundTruthIndex(std::vector<GtBox> boxes);
    static GroundTruthIndex from_records(std::span<const FeatureRecord> gt_records);

    const std::vector<GtBox>& boxes() const noexcept { return boxes_; }
    std::vector<GtBox> boxes_of_class(ClassId c) const;
    std::vector<ClassId> classes() const;  // ascending, classes with at least one instance
    std::size_t instances(ClassId c) const;
    std::size_t image_frequency(ClassId c) const;

private:
    std::vector<GtBox> boxes_;
    std::map<ClassId, std::size_t> instances_;
    std::map<ClassId, std::size_t> images_;
};

/// Frequency thresholds in images: >= frequent is frequent, <= rare is rare.
inline constexpr std::size_t kFrequentImages = 100;
inline constexpr std::size_t kRareImages = 10;

FrequencySplit frequency_split(std::size_t image_frequency);

/// COCO-style AP with 101-point interpolated precision. Labels are ignored: callers pass the
/// detections and GT boxes of one class (or of any predicate). nullopt when `gt` is empty.
std::optional<double> average_precision(std::span<const Detection> dets, std::span<const GtBox> gt,
                                        double iou_threshold);

/// {0.5} for "0.5", {0.50, 0.55, ..., 0.95} for "0.5:0.95", or a comma-separated list.
std::vector<double> parse_iou_thresholds(const std::string& text);

/// Per-class AP (averaged over thresholds) and split means. Only Mapped detections are scored.
EvalReport evaluate(std::span<const Detection> dets, const GroundTruthIndex& gt, const std::vector<double>& thresholds,
                    const ClassTable& classes);

ClassAgnosticMetrics class_agnostic_metrics(std::span<const Detection> dets, const GroundTruthIndex& gt,
                                            const ClassTable& classes, double iou_threshold);

}  // namespace ncd
