#include <doctest.h>

#include "ap_cases.hpp"
#include "ncd/error.hpp"
#include "ncd/evaluation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ncd;
using namespace ncd::testing;

TEST_CASE("crafted precision/recall cases") {
    for (const auto& c : crafted_ap_cases()) {
        CAPTURE(c.name);
        const auto ap = average_precision(c.dets, c.gt, c.iou_threshold);
        REQUIRE(ap.has_value() == c.expected.has_value());
        if (ap) CHECK(*ap == doctest::Approx(*c.expected).epsilon(1e-12));
    }
}

TEST_CASE("average precision equals the definitional oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<GtBox> gt;
        std::vector<Detection> dets;
        const int images = uniform_int(rng, 1, 4);
        for (int i = 0, n = uniform_int(rng, 1, 15); i < n; ++i) {
            gt.push_back(gtb(uniform_int(rng, 1, images), {std::floor(uniform(rng, 0, 40)), std::floor(uniform(rng, 0, 40)),
                                                           std::floor(uniform(rng, 4, 12)), std::floor(uniform(rng, 4, 12))}));
        }
        for (int i = 0, n = uniform_int(rng, 0, 40); i < n; ++i) {
            BoxGeometry box;
            if (uniform_int(rng, 0, 1)) {
                box = gt[uniform_int(rng, 0, static_cast<int>(gt.size()) - 1)].box;
                box.x += uniform(rng, -3, 3);
                box.y += uniform(rng, -3, 3);
            } else {
                box = {uniform(rng, 0, 40), uniform(rng, 0, 40), uniform(rng, 4, 12), uniform(rng, 4, 12)};
            }
            dets.push_back(det(uniform_int(rng, 1, images), box, uniform_int(rng, 0, 10) / 10.0));
        }
        const double thr = uniform_int(rng, 0, 1) ? 0.5 : 0.75;
        const double want = oracle::average_precision(dets, gt, thr);
        CHECK(std::abs(*average_precision(dets, gt, thr) - want) <= 1e-9);
    }
}

TEST_CASE("iou threshold parsing") {
    CHECK(parse_iou_thresholds("0.5") == std::vector<double>{0.5});
    const auto coco = parse_iou_thresholds("0.5:0.95");
    REQUIRE(coco.size() == 10);
    CHECK(coco.front() == 0.5);
    CHECK(coco[3] == 0.65);
    CHECK(coco.back() == 0.95);
    CHECK(parse_iou_thresholds("0.5,0.75") == std::vector<double>{0.5, 0.75});
    CHECK_THROWS_AS(parse_iou_thresholds("x"), ConfigError);
    CHECK_THROWS_AS(parse_iou_thresholds("1.5"), ConfigError);
}

TEST_CASE("frequency splits") {
    CHECK(frequency_split(100) == FrequencySplit::Frequent);
    CHECK(frequency_split(99) == FrequencySplit::Common);
    CHECK(frequency_split(11) == FrequencySplit::Common);
    CHECK(frequency_split(10) == FrequencySplit::Rare);
    CHECK(frequency_split(1) == FrequencySplit::Rare);
}

TEST_CASE("evaluate aggregates per split") {
    const ClassTable classes = {{0, "b0", ClassKind::Base}, {1, "n1", ClassKind::Novel}, {2, "n2", ClassKind::Novel}};
    std::vector<GtBox> gt;
    std::vector<Detection> dets;
    for (ImageId i = 0; i < 120; ++i) {
        gt.push_back({i, 0, {0, 0, 10, 10}});
        dets.push_back({i, {0, 0, 10, 10}, Label::mapped(0), 0.9});
    }
    for (ImageId i = 0; i < 5; ++i) gt.push_back({i, 1, {50, 50, 10, 10}});
    dets.push_back({0, {50, 50, 10, 10}, Label::mapped(1), 0.9});
    for (ImageId i = 0; i < 20; ++i) {
        gt.push_back({i, 2, {80, 0, 10, 10}});
        dets.push_back({i, {80, 0, 10, 10}, Label::unmapped(4), 0.9});
        dets.push_back({i, {80, 0, 10, 10}, Label::cluster(4), 0.9});
    }
    const EvalReport r = evaluate(dets, GroundTruthIndex(gt), {0.5}, classes);
    REQUIRE(r.per_class.size() == 3);
    const double ap1 = 21.0 / 101.0;  // recall 1/5 at precision 1
    CHECK(r.find(0)->ap == doctest::Approx(1.0));
    CHECK(r.find(1)->ap == doctest::Approx(ap1));
    CHECK(r.find(2)->ap == 0.0);
    CHECK(r.find(0)->split == FrequencySplit::Frequent);
    CHECK(r.find(1)->split == FrequencySplit::Rare);
    CHECK(r.find(2)->split == FrequencySplit::Common);
    CHECK(r.map_base == doctest::Approx(1.0));
    CHECK(r.map_novel == doctest::Approx(ap1 / 2));
    CHECK(r.map_all == doctest::Approx((1.0 + ap1) / 3));
    CHECK(*r.map_rare == doctest::Approx(ap1));
    CHECK(*r.map_common == 0.0);

    const ClassTable missing = {{0, "b0", ClassKind::Base}};
    CHECK_THROWS_AS(evaluate(dets, GroundTruthIndex(gt), {0.5}, missing), DomainError);
}

TEST_CASE("class-agnostic metrics") {
    const ClassTable classes = {{0, "b", ClassKind::Base}, {1, "n", ClassKind::Novel}};
    const std::vector<GtBox> gt = {{1, 0, {0, 0, 10, 10}}, {1, 1, {50, 0, 10, 10}}};
    const std::vector<Detection> dets = {{1, {0, 0, 10, 10}, Label::unmapped(3), 0.9},
                                         {1, {50, 0, 10, 10}, Label::mapped(1), 0.8}};
    const auto m = class_agnostic_metrics(dets, GroundTruthIndex(gt), classes, 0.5);
    CHECK(m.any_label == doctest::Approx(1.0));
    CHECK(m.novel_as_novel == doctest::Approx(0.5));  // the unmapped box is a false positive ranked first
    CHECK(m.base_gt_as_novel == doctest::Approx(1.0));
    CHECK(m.novel_gt_as_base == 0.0);
}
