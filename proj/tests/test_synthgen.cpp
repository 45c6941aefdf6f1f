#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "ncd/error.hpp"
#include "ncd/synthgen.hpp"

using namespace ncd;
namespace fs = std::filesystem;

namespace {

WorldConfig small_world() {
    WorldConfig cfg;
    cfg.dim = 16;
    cfg.n_base = 3;
    cfg.n_novel = 3;
    cfg.samples_per_class = 30;
    cfg.seed = 42;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double within_class_scatter(const World& w) {
    double total = 0;
    for (const auto& r : w.base_gt) total += (r.feature - w.class_means.col(*r.gt_class)).squaredNorm();
    return total / static_cast<double>(w.base_gt.size());
}

}  // namespace

TEST_CASE("class means are unit vectors with the configured separation") {
    WorldConfig cfg = small_world();
    cfg.n_base = 10;
    cfg.n_novel = 10;
    cfg.dim = 64;
    const World w = generate(cfg);
    const double max_cos = std::cos(30.0 * std::numbers::pi / 180.0);
    for (int a = 0; a < 20; ++a) {
        CHECK(w.class_means.col(a).norm() == doctest::Approx(1.0));
        for (int b = 0; b < a; ++b) CHECK(w.class_means.col(a).dot(w.class_means.col(b)) <= max_cos);
    }
}

TEST_CASE("infeasible separation is an error") {
    WorldConfig cfg = small_world();
    cfg.dim = 2;
    cfg.n_base = 5;
    cfg.n_novel = 5;
    cfg.min_angle_deg = 60;
    CHECK_THROWS_AS(generate(cfg), DomainError);
}

TEST_CASE("zero noise and no clutter reproduce the class means") {
    WorldConfig cfg = small_world();
    cfg.sigma = 0;
    cfg.clutter_sigma = 0;
    cfg.clutter_fraction = 0;
    const World w = generate(cfg);
    for (const auto* set : {&w.base_gt, &w.test_gt, &w.discovery_rpn, &w.test_rpn}) {
        for (std::size_t i = 0; i < set->size(); ++i) {
            const auto& r = (*set)[i];
            const ClassId c = r.gt_class ? *r.gt_class
                                         : (set == &w.discovery_rpn ? w.discovery_truth.latent_class[i]
                                                                    : w.test_truth.latent_class[i]);
            CHECK(r.feature == w.class_means.col(c));
        }
    }
}

TEST_CASE("truth tables agree with the records") {
    const WorldConfig cfg = small_world();
    const World w = generate(cfg);
    REQUIRE(w.discovery_truth.latent_class.size() == w.discovery_rpn.size());
    REQUIRE(w.test_truth.kind.size() == w.test_rpn.size());
    REQUIRE(w.box_embeddings.size() == w.discovery_rpn.size());
    for (const auto& r : w.base_gt) CHECK(*r.gt_class < cfg.n_base);
    for (const auto& r : w.discovery_gt) CHECK(*r.gt_class >= cfg.n_base);
    for (std::size_t i = 0; i < w.test_rpn.size(); ++i) {
        const auto kind = w.test_truth.kind[i];
        const ClassId latent = w.test_truth.latent_class[i];
        CHECK((kind == ProposalKind::Diffuse) == (latent < 0));
        const auto& pred = *w.test_rpn[i].base_pred;
        if (kind == ProposalKind::Object && latent < cfg.n_base) CHECK(pred == BasePrediction::base_class(latent));
        if (kind != ProposalKind::Object) CHECK(pred.is_background());
    }
    std::size_t clutter = 0;
    for (auto k : w.test_truth.kind) clutter += k != ProposalKind::Object;
    const double frac = static_cast<double>(clutter) / static_cast<double>(w.test_rpn.size());
    CHECK(frac == doctest::Approx(cfg.clutter_fraction).epsilon(0.2));
    CHECK(w.test_gt.size() == static_cast<std::size_t>(6 * cfg.samples_per_class));
}

TEST_CASE("same seed writes byte-identical files") {
    const WorldConfig cfg = small_world();
    const fs::path a = fs::temp_directory_path() / "ncd_synth_a";
    const fs::path b = fs::temp_directory_path() / "ncd_synth_b";
    const WorldFiles fa = write_world(generate(cfg), cfg, a);
    const WorldFiles fb = write_world(generate(cfg), cfg, b);
    for (auto member : {&WorldFiles::base_gt, &WorldFiles::discovery_rpn, &WorldFiles::test_rpn, &WorldFiles::test_gt,
                        &WorldFiles::classes, &WorldFiles::truth, &WorldFiles::box_embeddings,
                        &WorldFiles::text_embeddings}) {
        CHECK(slurp(fa.*member) == slurp(fb.*member));
        CHECK_FALSE(slurp(fa.*member).empty());
    }
    WorldConfig other = cfg;
    other.seed = 43;
    write_world(generate(other), other, b);
    CHECK(slurp(fa.test_rpn) != slurp(fb.test_rpn));
}

TEST_CASE("zipf class counts stay within three sigma") {
    WorldConfig cfg;
    cfg.dim = 64;
    cfg.n_base = 100;
    cfg.n_novel = 0;
    cfg.min_angle_deg = 30;
    cfg.samples_per_class = 100;
    cfg.distribution = LabelDistribution::LongTailed;
    cfg.zipf_s = 1.0;
    cfg.seed = 3;
    const World w = generate(cfg);
    const auto pmf = zipf_pmf(100, 1.0);
    std::vector<double> counts(100, 0);
    for (const auto& r : w.base_gt) ++counts[*r.gt_class];
    const double n = static_cast<double>(w.base_gt.size());
    CHECK(n == 10000);
    for (int c = 0; c < 100; ++c) {
        const double mean = n * pmf[c];
        CHECK(std::abs(counts[c] - mean) <= 3 * std::sqrt(mean * (1 - pmf[c])));
    }
    double total = 0;
    for (double p : pmf) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(pmf[0] / pmf[1] == doctest::Approx(2.0));
}

TEST_CASE("larger sigma gives larger within-class scatter") {
    double lo = 0, hi = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        WorldConfig cfg = small_world();
        cfg.seed = seed;
        cfg.sigma = 0.05;
        lo += within_class_scatter(generate(cfg));
        cfg.sigma = 0.1;
        hi += within_class_scatter(generate(cfg));
    }
    CHECK(hi > lo);
    CHECK(lo / 5 == doctest::Approx(0.05 * 0.05).epsilon(0.1));
}

TEST_CASE("flip probability confuses the simulated base head") {
    WorldConfig cfg = small_world();
    cfg.flip_prob = 0.5;
    const World w = generate(cfg);
    std::size_t objects = 0, flipped = 0;
    for (std::size_t i = 0; i < w.test_rpn.size(); ++i) {
        if (w.test_truth.kind[i] != ProposalKind::Object) continue;
        ++objects;
        flipped += w.test_rpn[i].base_pred->is_background();
    }
    CHECK(static_cast<double>(flipped) / objects == doctest::Approx(0.5).epsilon(0.15));
}
