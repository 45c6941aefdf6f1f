#include <doctest.h>

#include "ncd/error.hpp"
#include "ncd/prototypes.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ncd;
using namespace ncd::testing;

TEST_CASE("base prototypes are means of normalized features") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = uniform_int(rng, 2, 20);
        std::vector<FeatureRecord> recs;
        const int n = uniform_int(rng, 1, 80);
        for (int i = 0; i < n; ++i) {
            recs.push_back(gt_record(i, uniform_int(rng, 0, 9), random_vector(rng, dim, uniform(rng, 0.1, 10))));
        }
        const BasePrototypes b = compute_base_prototypes(recs);
        const auto expected = oracle::class_means_of_normalized(recs);
        REQUIRE(b.class_ids.size() == expected.size());
        std::size_t c = 0;
        for (const auto& [id, v] : expected) {
            CHECK(b.class_ids[c] == id);
            CHECK((b.vectors.col(c) - v).cwiseAbs().maxCoeff() < 1e-12);
            ++c;
        }
    }
}

TEST_CASE("prototype means are not renormalized") {
    Vector a = Vector::Zero(2), b = Vector::Zero(2);
    a(0) = 2;
    b(1) = 5;
    const std::vector<FeatureRecord> recs{gt_record(1, 4, a), gt_record(2, 4, b)};
    const BasePrototypes p = compute_base_prototypes(recs);
    CHECK(p.vectors(0, 0) == doctest::Approx(0.5));
    CHECK(p.vectors(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("zero features and wrong sources are rejected") {
    std::vector<FeatureRecord> recs{gt_record(1, 0, Vector::Ones(3)), gt_record(1, 0, Vector::Zero(3))};
    CHECK_THROWS_AS(compute_base_prototypes(recs), DomainError);
    recs[1] = rpn_record(1, Vector::Ones(3), BasePrediction::background());
    CHECK_THROWS_AS(compute_base_prototypes(recs), DomainError);
    CHECK_THROWS_AS(discover_novel_prototypes(std::vector<FeatureRecord>{gt_record(1, 0, Vector::Ones(3))},
                                              KMeansConfig{1}),
                    DomainError);
}

TEST_CASE("discovery clusters unit-normalized features") {
    Rng rng(2);
    std::vector<FeatureRecord> recs;
    const Vector d1 = random_unit(rng, 8), d2 = random_unit(rng, 8);
    for (int i = 0; i < 50; ++i) {
        recs.push_back(rpn_record(i, uniform(rng, 1, 20) * d1, BasePrediction::background()));
        recs.push_back(rpn_record(i, uniform(rng, 1, 20) * d2, BasePrediction::background()));
    }
    const Matrix centers = discover_novel_prototypes(recs, KMeansConfig{2});
    REQUIRE(centers.cols() == 2);
    const double e1 = std::min((centers.col(0) - d1).norm(), (centers.col(1) - d1).norm());
    const double e2 = std::min((centers.col(0) - d2).norm(), (centers.col(1) - d2).norm());
    CHECK(e1 < 1e-12);
    CHECK(e2 < 1e-12);
}

TEST_CASE("assemble checks dimensions") {
    BasePrototypes b{{0, 1}, Matrix::Random(4, 2)};
    const PrototypeSet s = assemble(b, Matrix::Random(4, 3));
    CHECK(s.dim == 4);
    CHECK(s.num_base() == 2);
    CHECK(s.num_novel() == 3);
    CHECK_THROWS_AS(assemble(b, Matrix::Random(5, 3)), DomainError);
    const PrototypeSet only_clusters = assemble({}, Matrix::Random(4, 3));
    CHECK(only_clusters.num_base() == 0);
    CHECK(only_clusters.base.rows() == 4);
}
