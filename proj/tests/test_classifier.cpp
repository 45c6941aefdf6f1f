#include <doctest.h>

#include <cmath>
#include <limits>

#include "ncd/classifier.hpp"
#include "ncd/error.hpp"
#include "test_util.hpp"

using namespace ncd;
using namespace ncd::testing;

namespace {

PrototypeSet random_set(Rng& rng, int dim, int k, int q) {
    PrototypeSet s;
    s.dim = dim;
    s.base.resize(dim, k);
    s.novel.resize(dim, q);
    for (int c = 0; c < k; ++c) {
        s.base_ids.push_back(3 * c + 1);
        s.base.col(c) = random_unit(rng, dim);
    }
    for (int j = 0; j < q; ++j) s.novel.col(j) = random_unit(rng, dim);
    s.validate();
    return s;
}

// Direct reading of the definition: logits, then argmax with background at index 0.
Label oracle_label(const FeatureRecord& r, const PrototypeSet& s, SimilarityMetric m) {
    const Vector f = r.feature / r.feature.norm();
    double best = -std::numeric_limits<double>::infinity();
    Label label = Label::background();
    for (int c = 0; c < s.num_base(); ++c) {
        const double v = similarity(f, s.base.col(c), m);
        if (v > best) {
            best = v;
            label = Label::base(s.base_ids[c]);
        }
    }
    for (int j = 0; j < s.num_novel(); ++j) {
        const double v = similarity(f, s.novel.col(j), m);
        if (v > best) {
            best = v;
            label = Label::cluster(j);
        }
    }
    if (r.base_pred && r.base_pred->is_background()) return Label::background();
    return label;
}

}  // namespace

TEST_CASE("background logit is the maximum when the base head says background") {
    // With gamma = 1 the logit of p = (a, 0) against f = e1 is 1 / (a - 1)^2.
    auto coord = [](double logit) { return 1.0 + 1.0 / std::sqrt(logit); };
    PrototypeSet s;
    s.dim = 2;
    s.base_ids = {0, 1, 2};
    s.base = Matrix::Zero(2, 3);
    s.base(0, 0) = coord(0.2);
    s.base(0, 1) = coord(0.7);
    s.base(0, 2) = coord(0.4);
    s.novel.resize(2, 0);
    InferenceConfig cfg;
    cfg.metric = SimilarityMetric::inv_sq_euclidean(1);
    const FeatureRecord r = rpn_record(1, Vector::Unit(2, 0), BasePrediction::background());
    const LogitVector l = compute_logits(r, s, cfg);
    CHECK(l.per_base(0) == doctest::Approx(0.2));
    CHECK(l.per_base(1) == doctest::Approx(0.7));
    CHECK(l.per_base(2) == doctest::Approx(0.4));
    CHECK(l.background == doctest::Approx(0.7));

    cfg.background_classifier = false;
    CHECK(compute_logits(r, s, cfg).background == 0.0);
    cfg.metric = SimilarityMetric::dot_product();
    CHECK(compute_logits(r, s, cfg).background == std::numeric_limits<double>::lowest());
}

TEST_CASE("feature equal to a prototype saturates its logit") {
    Rng rng(4);
    const PrototypeSet s = random_set(rng, 8, 3, 4);
    const FeatureRecord r = rpn_record(1, 5.0 * s.base.col(1), BasePrediction::base_class(4));
    const Vector l = compute_logits(r, s, {}).stacked();
    CHECK(argmax_first(l) == 2);
    for (Eigen::Index i = 0; i < l.size(); ++i) {
        if (i != 2) CHECK(l(i) < l(2));
    }
}

TEST_CASE("normalize_probs examples") {
    Vector a(2);
    a << 1, 3;
    const Vector p = normalize_probs(a, ProbNorm::L1);
    CHECK(p(0) == doctest::Approx(0.25));
    CHECK(p(1) == doctest::Approx(0.75));

    const Vector s = normalize_probs(Vector::Zero(2), ProbNorm::Softmax);
    CHECK(s(0) == doctest::Approx(0.5));
    CHECK(s(1) == doctest::Approx(0.5));

    CHECK_THROWS_AS(normalize_probs(Vector::Zero(3), ProbNorm::L1), DomainError);

    Vector signed_logits(4);
    signed_logits << std::numeric_limits<double>::lowest(), -1.0, 1.0, 0.0;
    const Vector q = normalize_probs(signed_logits, ProbNorm::L1);
    CHECK(q(0) == 0.0);
    CHECK(q(1) == 0.0);
    CHECK(q(2) == doctest::Approx(2.0 / 3.0));
    CHECK(q(3) == doctest::Approx(1.0 / 3.0));

    Vector ties(3);
    ties << std::numeric_limits<double>::lowest(), -0.5, -0.5;
    const Vector t = normalize_probs(ties, ProbNorm::L1);
    CHECK(t(1) == doctest::Approx(0.5));
    CHECK(t(2) == doctest::Approx(0.5));
}

TEST_CASE("normalize_probs sums to one and keeps the argmax") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = uniform_int(rng, 1, 30);
        Vector v(n);
        const bool nonneg = trial % 2 == 0;
        for (int i = 0; i < n; ++i) v(i) = nonneg ? uniform(rng, 0, 5) : uniform(rng, -5, 5);
        if (nonneg) v(uniform_int(rng, 0, n - 1)) += 0.1;
        for (auto mode : {ProbNorm::L1, ProbNorm::Softmax}) {
            const Vector p = normalize_probs(v, mode);
            CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(argmax_first(p) == argmax_first(v));
            if (mode == ProbNorm::L1 && nonneg) {
                const Vector oracle = v / v.sum();
                CHECK((p - oracle).cwiseAbs().maxCoeff() < 1e-15);
            }
        }
    }
}

TEST_CASE("classify_image labels") {
    Rng rng(6);
    const PrototypeSet s = random_set(rng, 16, 4, 5);
    InferenceConfig cfg;

    std::vector<FeatureRecord> recs;
    recs.push_back(rpn_record(7, s.base.col(2) + 0.01 * random_vector(rng, 16), BasePrediction::base_class(7)));
    recs.push_back(rpn_record(7, s.novel.col(3) + 0.01 * random_vector(rng, 16), BasePrediction::base_class(1)));
    recs.push_back(rpn_record(7, s.novel.col(3), BasePrediction::background()));
    const auto out = classify_image(recs, s, cfg);
    REQUIRE(out.size() == 3);
    CHECK(out[0].label == Label::base(7));
    CHECK(out[1].label == Label::cluster(3));
    CHECK(out[2].label == Label::background());
    for (const auto& c : out) CHECK((c.score >= 0 && c.score <= 1));

    std::vector<FeatureRecord> mixed = recs;
    mixed[1].image_id = 8;
    CHECK_THROWS_AS(classify_image(mixed, s, cfg), DomainError);
}

TEST_CASE("tied similarities under a background prediction give background") {
    PrototypeSet s;
    s.dim = 2;
    s.base_ids = {0, 1};
    s.base.resize(2, 2);
    s.base << 1, 0, 0, 1;
    s.novel.resize(2, 0);
    Vector f(2);
    f << 1, 1;
    const auto out = classify_image(std::vector<FeatureRecord>{rpn_record(1, f, BasePrediction::background())}, s, {});
    CHECK(out[0].label == Label::background());
    CHECK(out[0].score == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("all-clusters set never yields base labels") {
    Rng rng(8);
    const PrototypeSet s = random_set(rng, 8, 0, 6);
    std::vector<FeatureRecord> recs;
    for (int i = 0; i < 50; ++i) {
        recs.push_back(rpn_record(1, random_vector(rng, 8),
                                  i % 3 ? BasePrediction::base_class(0) : BasePrediction::background()));
    }
    for (const auto& c : classify_image(recs, s, {})) {
        CHECK((c.label.kind == LabelKind::Background || c.label.kind == LabelKind::Cluster));
    }
}

TEST_CASE("labels match the direct oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const PrototypeSet s = random_set(rng, 12, uniform_int(rng, 0, 6), uniform_int(rng, 1, 8));
        std::vector<FeatureRecord> recs;
        for (int i = 0; i < 40; ++i) {
            recs.push_back(rpn_record(1, random_vector(rng, 12),
                                      uniform_int(rng, 0, 3) ? BasePrediction::base_class(0) : BasePrediction::background()));
        }
        const auto out = classify_image(recs, s, {});
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(out[i].label == oracle_label(recs[i], s, SimilarityMetric::inv_sq_euclidean(2)));
        }
    }
}

TEST_CASE("removing a prototype that never wins leaves labels unchanged") {
    Rng rng(10);
    PrototypeSet s = random_set(rng, 8, 3, 4);
    std::vector<FeatureRecord> recs;
    for (int i = 0; i < 200; ++i) recs.push_back(rpn_record(1, random_vector(rng, 8), BasePrediction::base_class(1)));
    s.novel.col(3) = Vector::Constant(8, 100.0);
    const auto before = classify_image(recs, s, {});
    PrototypeSet reduced = s;
    reduced.novel = s.novel.leftCols(3);
    const auto after = classify_image(recs, reduced, {});
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(before[i].label == after[i].label);
}
