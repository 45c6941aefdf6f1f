#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "ncd/evaluation.hpp"
#include "ncd/types.hpp"

namespace ncd::oracle {

/// Corner-based IoU written without the library helpers.
inline double box_iou(const BoxGeometry& a, const BoxGeometry& b) {
    const double x1 = std::max(a.x, b.x), y1 = std::max(a.y, b.y);
    const double x2 = std::min(a.x + a.w, b.x + b.w), y2 = std::min(a.y + a.h, b.y + b.h);
    const double inter = (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0;
    const double u = a.w * a.h + b.w * b.h - inter;
    return u > 0 ? inter / u : 0.0;
}

/// O(n^2) NMS: a detection survives when no earlier-ranked survivor of its label overlaps it.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double score_threshold, double nms_iou, int top_m,
                                  bool drop_background, double empty_extent) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        if (drop_background && d.label.kind == LabelKind::Background) continue;
        if (d.score <= score_threshold) continue;
        if (d.box.w <= empty_extent || d.box.h <= empty_extent) continue;
        idx.push_back(i);
    }
    // Insertion sort keeps the rule explicit: higher score, then smaller label, then earlier input.
    auto before = [&](std::size_t a, std::size_t b) {
        if (dets[a].score > dets[b].score) return true;
        if (dets[a].score < dets[b].score) return false;
        if (dets[a].label < dets[b].label) return true;
        if (dets[b].label < dets[a].label) return false;
        return a < b;
    };
    for (std::size_t i = 1; i < idx.size(); ++i) {
        for (std::size_t j = i; j > 0 && before(idx[j], idx[j - 1]); --j) std::swap(idx[j], idx[j - 1]);
    }
    std::vector<char> alive(idx.size(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (!alive[j] || dets[idx[j]].label != dets[idx[i]].label) continue;
            if (box_iou(dets[idx[i]].box, dets[idx[j]].box) > nms_iou) {
                alive[i] = 0;
                break;
            }
        }
    }
    std::vector<Detection> out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (alive[i] && static_cast<int>(out.size()) < top_m) out.push_back(dets[idx[i]]);
    }
    return out;
}

/// Maximum total weight over all partial injections rows -> columns, by enumeration.
inline std::int64_t brute_force_matching(const std::vector<std::vector<std::int64_t>>& w) {
    const std::size_t rows = w.size();
    const std::size_t cols = rows ? w[0].size() : 0;
    std::vector<char> used(cols, 0);
    std::function<std::int64_t(std::size_t)> go = [&](std::size_t r) -> std::int64_t {
        if (r == rows) return 0;
        std::int64_t best = go(r + 1);
        for (std::size_t c = 0; c < cols; ++c) {
            if (used[c]) continue;
            used[c] = 1;
            best = std::max(best, w[r][c] + go(r + 1));
            used[c] = 0;
        }
        return best;
    };
    return go(0);
}

/// AP by the textbook definition: interpolated precision at recall r is the maximum
/// precision over every ranking prefix whose recall reaches r.
inline double average_precision(const std::vector<Detection>& dets, const std::vector<GtBox>& gt, double thr) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<char> used(gt.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> prefix;  // (tp, rank)
    std::size_t tp = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const Detection& d = dets[order[rank]];
        double best = -1;
        std::size_t pick = gt.size();
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g] || gt[g].image_id != d.image_id) continue;
            const double v = box_iou(d.box, gt[g].box);
            if (v >= thr && v > best) {
                best = v;
                pick = g;
            }
        }
        if (pick < gt.size()) {
            used[pick] = 1;
            ++tp;
        }
        prefix.emplace_back(tp, rank + 1);
    }
    double sum = 0;
    for (int k = 0; k <= 100; ++k) {
        double p = 0;
        for (const auto& [t, n] : prefix) {
            // recall t / |gt| >= k / 100, compared in integers
            if (t * 100 >= static_cast<std::size_t>(k) * gt.size()) p = std::max(p, static_cast<double>(t) / n);
        }
        sum += p;
    }
    return sum / 101.0;
}

/// Base prototypes as the literal per-class average of unit vectors.
inline std::map<ClassId, Vector> class_means_of_normalized(const std::vector<FeatureRecord>& records) {
    std::map<ClassId, std::vector<Vector>> groups;
    for (const auto& r : records) groups[*r.gt_class].push_back(r.feature / r.feature.norm());
    std::map<ClassId, Vector> out;
    for (const auto& [c, vs] : groups) {
        Vector acc = Vector::Zero(vs.front().size());
        for (const auto& v : vs) acc += v;
        out[c] = acc / static_cast<double>(vs.size());
    }
    return out;
}

}  // namespace ncd::oracle
