#include "ncd/postprocess.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ncd {

double iou(const BoxGeometry& a, const BoxGeometry& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (!(uni > 0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<Detection> postprocess_image(const std::vector<Detection>& dets, const PostprocessConfig& config) {
    std::vector<std::size_t> order;
    order.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const auto& d = dets[i];
        if (config.drop_background && d.label.kind == LabelKind::Background) continue;
        if (!(d.score > config.score_threshold)) continue;
        if (d.box.w <= kEmptyBoxExtent || d.box.h <= kEmptyBoxExtent) continue;
        order.push_back(i);
    }
    auto ranked = [&dets](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        if (dets[a].label != dets[b].label) return dets[a].label < dets[b].label;
        return a < b;
    };
    std::sort(order.begin(), order.end(), ranked);

    std::map<Label, std::vector<std::size_t>> kept_by_label;
    std::vector<std::size_t> kept;
    for (std::size_t i : order) {
        auto& same = kept_by_label[dets[i].label];
        const bool suppressed =
            std::any_of(same.begin(), same.end(), [&](std::size_t k) { return iou(dets[i].box, dets[k].box) > config.nms_iou; });
        if (suppressed) continue;
        same.push_back(i);
        kept.push_back(i);
    }
    if (config.top_m >= 0 && kept.size() > static_cast<std::size_t>(config.top_m)) kept.resize(config.top_m);

    std::vector<Detection> out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.push_back(dets[i]);
    return out;
}

}  // namespace ncd
