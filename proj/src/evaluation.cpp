#include "ncd/evaluation.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ncd/error.hpp"
#include "ncd/postprocess.hpp"

namespace ncd {

GroundTruthIndex::GroundTruthIndex(std::vector<GtBox> boxes) : boxes_(std::move(boxes)) {
    std::map<ClassId, std::set<ImageId>> seen;
    for (const auto& b : boxes_) {
        ++instances_[b.class_id];
        seen[b.class_id].insert(b.image_id);
    }
    for (const auto& [c, imgs] : seen) images_[c] = imgs.size();
}

GroundTruthIndex GroundTruthIndex::from_records(std::span<const FeatureRecord> gt_records) {
    std::vector<GtBox> boxes;
    boxes.reserve(gt_records.size());
    for (const auto& r : gt_records) {
        if (!r.gt_class) throw DomainError("GroundTruthIndex: record without gt_class");
        boxes.push_back({r.image_id, *r.gt_class, r.box});
    }
    return GroundTruthIndex(std::move(boxes));
}

std::vector<GtBox> GroundTruthIndex::boxes_of_class(ClassId c) const {
    std::vector<GtBox> out;
    std::copy_if(boxes_.begin(), boxes_.end(), std::back_inserter(out), [c](const GtBox& b) { return b.class_id == c; });
    return out;
}

std::vector<ClassId> GroundTruthIndex::classes() const {
    std::vector<ClassId> out;
    for (const auto& [c, n] : instances_) out.push_back(c);
    return out;
}

std::size_t GroundTruthIndex::instances(ClassId c) const {
    auto it = instances_.find(c);
    return it == instances_.end() ? 0 : it->second;
}

std::size_t GroundTruthIndex::image_frequency(ClassId c) const {
    auto it = images_.find(c);
    return it == images_.end() ? 0 : it->second;
}

FrequencySplit frequency_split(std::size_t image_frequency) {
    if (image_frequency >= kFrequentImages) return FrequencySplit::Frequent;
    if (image_frequency <= kRareImages) return FrequencySplit::Rare;
    return FrequencySplit::Common;
}

std::optional<double> average_precision(std::span<const Detection> dets, std::span<const GtBox> gt,
                                        double iou_threshold) {
    if (gt.empty()) return std::nullopt;

    std::unordered_map<ImageId, std::vector<std::size_t>> gt_by_image;
    for (std::size_t g = 0; g < gt.size(); ++g) gt_by_image[gt[g].image_id].push_back(g);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    std::vector<char> matched(gt.size(), 0);
    std::vector<double> precision, recall;
    precision.reserve(dets.size());
    recall.reserve(dets.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i : order) {
        std::ptrdiff_t best = -1;
        double best_iou = iou_threshold;
        if (auto it = gt_by_image.find(dets[i].image_id); it != gt_by_image.end()) {
            for (std::size_t g : it->second) {
                if (matched[g]) continue;
                const double v = iou(dets[i].box, gt[g].box);
                if (v >= best_iou && (best < 0 || v > best_iou)) {
                    best_iou = v;
                    best = static_cast<std::ptrdiff_t>(g);
                }
            }
        }
        if (best >= 0) {
            assert(!matched[best]);
            matched[best] = 1;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(gt.size()));
    }

    // precision envelope: max precision at any recall >= the current one
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double sum = 0;
    std::size_t pos = 0;
    for (int k = 0; k <= 100; ++k) {
        const double r = static_cast<double>(k) / 100.0;
        while (pos < recall.size() && recall[pos] < r) ++pos;
        if (pos < recall.size()) sum += precision[pos];
    }
    return sum / 101.0;
}

std::vector<double> parse_iou_thresholds(const std::string& text) {
    std::vector<double> out;
    auto parse = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad IoU threshold '" + s + "'");
        }
        if (used != s.size() || !(v > 0) || v > 1) throw ConfigError("bad IoU threshold '" + s + "'");
        return v;
    };
    if (auto colon = text.find(':'); colon != std::string::npos) {
        const double lo = parse(text.substr(0, colon));
        const double hi = parse(text.substr(colon + 1));
        if (hi < lo) throw ConfigError("IoU range '" + text + "' is empty");
        for (int i = 0;; ++i) {
            const double t = lo + 0.05 * i;
            if (t > hi + 1e-9) break;
            out.push_back(std::round(t * 1e6) / 1e6);
        }
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse(item));
    if (out.empty()) throw ConfigError("no IoU thresholds given");
    return out;
}

namespace {

const ClassInfo& class_info(const ClassTable& classes, ClassId id) {
    auto it = std::find_if(classes.begin(), classes.end(), [id](const ClassInfo& c) { return c.id == id; });
    if (it == classes.end()) throw DomainError("evaluate: class " + std::to_string(id) + " missing from class table");
    return *it;
}

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool is_kind(const ClassTable& classes, ClassId id, ClassKind kind) {
    auto it = std::find_if(classes.begin(), classes.end(), [id](const ClassInfo& c) { return c.id == id; });
    return it != classes.end() && it->kind == kind;
}

bool predicted_novel(const Detection& d, const ClassTable& classes) {
    switch (d.label.kind) {
        case LabelKind::Mapped: return is_kind(classes, d.label.id, ClassKind::Novel);
        case LabelKind::Cluster:
        case LabelKind::UnmappedNovel: return true;
        default: return false;
    }
}

bool predicted_base(const Detection& d, const ClassTable& classes) {
    switch (d.label.kind) {
        case LabelKind::Mapped: return is_kind(classes, d.label.id, ClassKind::Base);
        case LabelKind::Base: return true;
        default: return false;
    }
}

template <typename DetPred, typename GtPred>
double predicate_ap(std::span<const Detection> dets, const GroundTruthIndex& gt, double thr, DetPred dp, GtPred gp) {
    std::vector<Detection> d;
    std::copy_if(dets.begin(), dets.end(), std::back_inserter(d), dp);
    std::vector<GtBox> g;
    std::copy_if(gt.boxes().begin(), gt.boxes().end(), std::back_inserter(g), gp);
    return average_precision(d, g, thr).value_or(0.0);
}

}  // namespace

EvalReport evaluate(std::span<const Detection> dets, const GroundTruthIndex& gt, const std::vector<double>& thresholds,
                    const ClassTable& classes) {
    if (thresholds.empty()) throw DomainError("evaluate: no IoU thresholds");
    EvalReport report;
    report.iou_thresholds = thresholds;

    std::map<ClassId, std::vector<Detection>> by_class;
    for (const auto& d : dets) {
        if (d.label.kind == LabelKind::Mapped) by_class[d.label.id].push_back(d);
    }

    std::vector<double> all, base, novel, frequent, common, rare;
    for (ClassId c : gt.classes()) {
        const ClassInfo& info = class_info(classes, c);
        ClassEval e;
        e.id = c;
        e.kind = info.kind;
        e.gt_instances = gt.instances(c);
        e.gt_images = gt.image_frequency(c);
        e.split = info.kind == ClassKind::Base ? FrequencySplit::Frequent : frequency_split(e.gt_images);
        const auto gt_c = gt.boxes_of_class(c);
        const auto& dets_c = by_class[c];
        for (double t : thresholds) e.ap_per_iou.push_back(*average_precision(dets_c, gt_c, t));
        e.ap = *mean_of(e.ap_per_iou);

        all.push_back(e.ap);
        (info.kind == ClassKind::Base ? base : novel).push_back(e.ap);
        switch (e.split) {
            case FrequencySplit::Frequent: frequent.push_back(e.ap); break;
            case FrequencySplit::Common: common.push_back(e.ap); break;
            case FrequencySplit::Rare: rare.push_back(e.ap); break;
        }
        report.per_class.push_back(std::move(e));
    }
    report.map_all = mean_of(all).value_or(0.0);
    report.map_base = mean_of(base).value_or(0.0);
    report.map_novel = mean_of(novel).value_or(0.0);
    report.map_frequent = mean_of(frequent);
    report.map_common = mean_of(common);
    report.map_rare = mean_of(rare);

    ClassAgnosticMetrics agnostic;
    for (double t : thresholds) {
        const auto m = class_agnostic_metrics(dets, gt, classes, t);
        agnostic.any_label += m.any_label / thresholds.size();
        agnostic.novel_as_novel += m.novel_as_novel / thresholds.size();
        agnostic.base_gt_as_novel += m.base_gt_as_novel / thresholds.size();
        agnostic.novel_gt_as_base += m.novel_gt_as_base / thresholds.size();
    }
    report.class_agnostic = agnostic;
    return report;
}

ClassAgnosticMetrics class_agnostic_metrics(std::span<const Detection> dets, const GroundTruthIndex& gt,
                                            const ClassTable& classes, double iou_threshold) {
    auto any_det = [](const Detection& d) { return d.label.kind != LabelKind::Background; };
    auto any_gt = [](const GtBox&) { return true; };
    auto novel_det = [&](const Detection& d) { return predicted_novel(d, classes); };
    auto base_det = [&](const Detection& d) { return predicted_base(d, classes); };
    auto novel_gt = [&](const GtBox& g) { return is_kind(classes, g.class_id, ClassKind::Novel); };
    auto base_gt = [&](const GtBox& g) { return is_kind(classes, g.class_id, ClassKind::Base); };

    ClassAgnosticMetrics m;
    m.any_label = predicate_ap(dets, gt, iou_threshold, any_det, any_gt);
    m.novel_as_novel = predicate_ap(dets, gt, iou_threshold, novel_det, novel_gt);
    m.base_gt_as_novel = predicate_ap(dets, gt, iou_threshold, novel_det, base_gt);
    m.novel_gt_as_base = predicate_ap(dets, gt, iou_threshold, base_det, novel_gt);
    return m;
}

}  // namespace ncd
