#include <doctest.h>

#include "ncd/postprocess.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ncd;
using namespace ncd::testing;

namespace {

std::vector<Detection> random_image(Rng& rng, int n) {
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
        Detection d;
        d.image_id = 1;
        d.box = {std::floor(uniform(rng, 0, 50)), std::floor(uniform(rng, 0, 50)), std::floor(uniform(rng, 0, 30)),
                 std::floor(uniform(rng, 0, 30))};
        const int k = uniform_int(rng, 0, 3);
        d.label = k == 0 ? Label::background() : (k == 1 ? Label::base(uniform_int(rng, 0, 2)) : Label::cluster(uniform_int(rng, 0, 2)));
        // coarse scores force ties
        d.score = uniform_int(rng, 0, 20) / 20.0;
        dets.push_back(d);
    }
    return dets;
}

}  // namespace

TEST_CASE("iou examples") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
    CHECK(iou({0, 0, 2, 2}, {5, 5, 2, 2}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {1, 0, 2, 2}) == doctest::Approx(1.0 / 3.0));
    CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
}

TEST_CASE("nms examples") {
    const BoxGeometry b{10, 10, 20, 20};
    std::vector<Detection> same{{1, b, Label::cluster(0), 0.9}, {1, b, Label::cluster(0), 0.8}};
    auto out = postprocess_image(same, PostprocessConfig::voc());
    REQUIRE(out.size() == 1);
    CHECK(out[0].score == 0.9);

    std::vector<Detection> diff{{1, b, Label::cluster(0), 0.9}, {1, b, Label::base(3), 0.8}};
    CHECK(postprocess_image(diff, PostprocessConfig::voc()).size() == 2);

    std::vector<Detection> low{{1, b, Label::cluster(0), 0.05}, {1, b, Label::background(), 0.9}};
    CHECK(postprocess_image(low, PostprocessConfig::voc()).empty());
}

TEST_CASE("lvis preset keeps the 300 best") {
    Rng rng(1);
    std::vector<Detection> dets;
    for (int i = 0; i < 400; ++i) {
        dets.push_back({1, {10.0 * i, 0, 5, 5}, Label::cluster(0), (i + 1) / 401.0});
    }
    const auto out = postprocess_image(dets, PostprocessConfig::lvis());
    REQUIRE(out.size() == 300);
    CHECK(out.front().score == 400 / 401.0);
    CHECK(out.back().score == 101 / 401.0);
}

TEST_CASE("postprocess equals the quadratic reference") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto dets = random_image(rng, uniform_int(rng, 0, 200));
        PostprocessConfig cfg;
        cfg.score_threshold = uniform_int(rng, 0, 4) / 10.0;
        cfg.nms_iou = uniform_int(rng, 1, 9) / 10.0;
        cfg.top_m = uniform_int(rng, 1, 150);
        cfg.drop_background = trial % 3 != 0;
        const auto got = postprocess_image(dets, cfg);
        const auto want = oracle::nms(dets, cfg.score_threshold, cfg.nms_iou, cfg.top_m, cfg.drop_background, kEmptyBoxExtent);
        CHECK(got == want);
    }
}

TEST_CASE("raising the score threshold never adds detections") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto dets = random_image(rng, 100);
        PostprocessConfig lo, hi;
        lo.top_m = hi.top_m = 1000;
        lo.score_threshold = 0.2;
        hi.score_threshold = 0.4;
        const auto a = postprocess_image(dets, lo);
        const auto b = postprocess_image(dets, hi);
        CHECK(b.size() <= a.size());
        for (const auto& d : b) CHECK(std::find(a.begin(), a.end(), d) != a.end());
    }
}
