#pragma once

#include <vector>

#include "ncd/types.hpp"

namespace ncd {

struct PostprocessConfig {
    double score_threshold = 0.05;  // keep score > threshold
    double nms_iou = 0.5;           // suppress IoU > nms_iou within a label
    int top_m = 100;
    bool drop_background = true;

    static PostprocessConfig voc() { return {}; }
    static PostprocessConfig lvis() { return {0.0, 0.5, 300, true}; }
};

/// Boxes no wider or taller than this are treated as empty.
inline constexpr double kEmptyBoxExtent = 1e-3;

double iou(const BoxGeometry& a, const BoxGeometry& b);

/// Filter, per-label greedy NMS, then the top_m by score. Output is sorted by
/// (score desc, label asc, input index asc).
std::vector<Detection> postprocess_image(const std::vector<Detection>& dets, const PostprocessConfig& config);

}  // namespace ncd
