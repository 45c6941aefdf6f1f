#include "ncd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "ncd/error.hpp"
#include "ncd/feature_io.hpp"
#include "ncd/json_io.hpp"

namespace ncd {
namespace {

constexpr double kImageWidth = 640;
constexpr double kImageHeight = 480;
constexpr ImageId kBaseImages = 1;
constexpr ImageId kDiscoveryImages = 1'000'000;
constexpr ImageId kTestImages = 2'000'000;

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool bernoulli(double p) { return p > 0 && uniform(0, 1) < p; }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    Vector gaussian(int dim, double stddev) {
        Vector v(dim);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int i = 0; i < dim; ++i) v(i) = n(rng_) * stddev;
        return v;
    }

    Vector direction(int dim) {
        Vector v;
        do {
            v = gaussian(dim, 1.0);
        } while (v.norm() < 1e-9);
        return v.normalized();
    }

    int categorical(const std::vector<double>& pmf) {
        return std::discrete_distribution<int>(pmf.begin(), pmf.end())(rng_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), rng_);
    }

private:
    std::mt19937_64 rng_;
};

Matrix sample_class_means(const WorldConfig& cfg, Sampler& s) {
    const int n = cfg.n_base + cfg.n_novel;
    const double max_cos = std::cos(cfg.min_angle_deg * std::numbers::pi / 180.0);
    Matrix means(cfg.dim, n);
    constexpr int kAttempts = 10000;
    for (int c = 0; c < n; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const Vector v = s.direction(cfg.dim);
            placed = true;
            for (int o = 0; o < c && placed; ++o) placed = v.dot(means.col(o)) <= max_cos;
            if (placed) means.col(c) = v;
        }
        if (!placed) {
            throw DomainError("synthgen: cannot place " + std::to_string(n) + " class directions in " +
                              std::to_string(cfg.dim) + " dimensions with " + std::to_string(cfg.min_angle_deg) +
                              " degree separation");
        }
    }
    return means;
}

std::vector<ClassId> class_list(const WorldConfig& cfg, ClassId first, int count, int per_class, Sampler& s,
                                 bool uniform) {
    std::vector<ClassId> out;
    if (count <= 0 || per_class <= 0) return out;
    if (uniform || cfg.distribution == LabelDistribution::Uniform) {
        for (int c = 0; c < count; ++c) out.insert(out.end(), per_class, first + c);
    } else {
        const auto pmf = zipf_pmf(count, cfg.zipf_s);
        for (int i = 0; i < count * per_class; ++i) out.push_back(first + s.categorical(pmf));
    }
    return out;
}

struct Dataset {
    std::vector<FeatureRecord> gt;
    std::vector<FeatureRecord> rpn;
    ProposalTruth truth;
    std::vector<FeatureRecord> embeddings;
};

class WorldBuilder {
public:
    WorldBuilder(const WorldConfig& cfg, World& world, Sampler& s) : cfg_(cfg), world_(world), s_(s) {
        // the simulated base head names a novel object after its most similar base class
        nearest_base_.resize(cfg.n_base + cfg.n_novel);
        for (int c = 0; c < cfg.n_base + cfg.n_novel; ++c) {
            int best = c < cfg.n_base ? c : -1;
            if (best < 0) {
                double best_cos = -2;
                for (int b = 0; b < cfg.n_base; ++b) {
                    const double v = world.class_means.col(c).dot(world.class_means.col(b));
                    if (v > best_cos) {
                        best_cos = v;
                        best = b;
                    }
                }
            }
            nearest_base_[c] = best;
        }
    }

    Dataset build(std::vector<ClassId> objects, ImageId first_image, bool with_rpn, bool with_embeddings) {
        s_.shuffle(objects);
        Dataset ds;
        const int per_image = std::max(1, cfg_.objects_per_image);
        const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(per_image))));
        const int grid_rows = (per_image + grid_cols - 1) / grid_cols;
        const double cell_w = kImageWidth / grid_cols;
        const double cell_h = kImageHeight / grid_rows;
        const double clutter_ratio = cfg_.clutter_fraction / (1.0 - cfg_.clutter_fraction);

        ImageId image = first_image;
        for (std::size_t start = 0; start < objects.size(); start += per_image, ++image) {
            const std::size_t end = std::min(objects.size(), start + per_image);
            std::vector<BoxGeometry> gt_boxes;
            for (std::size_t o = start; o < end; ++o) {
                const int cell = static_cast<int>(o - start);
                const double w = s_.uniform(0.4, 0.8) * cell_w;
                const double h = s_.uniform(0.4, 0.8) * cell_h;
                const BoxGeometry box{(cell % grid_cols) * cell_w + s_.uniform(0, cell_w - w),
                                      (cell / grid_cols) * cell_h + s_.uniform(0, cell_h - h), w, h};
                gt_boxes.push_back(box);
                FeatureRecord gt;
                gt.image_id = image;
                gt.box = box;
                gt.feature = sample_feature(objects[o], cfg_.sigma);
                gt.source = Source::GT;
                gt.gt_class = objects[o];
                ds.gt.push_back(std::move(gt));
            }
            if (!with_rpn) continue;

            for (std::size_t o = start; o < end; ++o) {
                const BoxGeometry& g = gt_boxes[o - start];
                const BoxGeometry box{g.x + s_.uniform(-0.04, 0.04) * g.w, g.y + s_.uniform(-0.04, 0.04) * g.h,
                                      g.w * s_.uniform(0.95, 1.05), g.h * s_.uniform(0.95, 1.05)};
                add_proposal(ds, image, box, objects[o], ProposalKind::Object, with_embeddings);
            }
            const double expected = clutter_ratio * static_cast<double>(end - start);
            const int clutter = static_cast<int>(expected) + (s_.bernoulli(expected - std::floor(expected)) ? 1 : 0);
            for (int k = 0; k < clutter; ++k) {
                if (s_.bernoulli(cfg_.mislocalized_share)) {
                    const int o = s_.integer(0, static_cast<int>(end - start) - 1);
                    const BoxGeometry& g = gt_boxes[o];
                    const double shift = s_.uniform(0.5, 0.7) * (s_.bernoulli(0.5) ? 1 : -1);
                    BoxGeometry box = g;
                    if (s_.bernoulli(0.5)) {
                        box.x += shift * g.w;
                    } else {
                        box.y += shift * g.h;
                    }
                    add_proposal(ds, image, box, objects[start + o], ProposalKind::Mislocalized, with_embeddings);
                } else {
                    const double w = s_.uniform(20, 200);
                    const double h = s_.uniform(20, 200);
                    const BoxGeometry box{s_.uniform(0, kImageWidth - w), s_.uniform(0, kImageHeight - h), w, h};
                    add_proposal(ds, image, box, -1, ProposalKind::Diffuse, with_embeddings);
                }
            }
        }
        return ds;
    }

private:
    Vector sample_feature(ClassId c, double sigma) {
        Vector f = world_.class_means.col(c);
        if (sigma > 0) f += s_.gaussian(cfg_.dim, sigma / std::sqrt(static_cast<double>(cfg_.dim)));
        return f;
    }

    void add_proposal(Dataset& ds, ImageId image, const BoxGeometry& box, ClassId latent, ProposalKind kind,
                      bool with_embeddings) {
        FeatureRecord r;
        r.image_id = image;
        r.box = box;
        r.source = Source::RPN;
        const bool object = kind == ProposalKind::Object;
        if (kind == ProposalKind::Diffuse) {
            r.feature = s_.direction(cfg_.dim);
        } else {
            r.feature = sample_feature(latent, object ? cfg_.sigma : cfg_.clutter_sigma);
        }
        const bool flip = s_.bernoulli(cfg_.flip_prob);
        if (object && !flip && nearest_base_[latent] >= 0) {
            r.base_pred = BasePrediction::base_class(nearest_base_[latent]);
        } else if (!object && flip && cfg_.n_base > 0) {
            r.base_pred = BasePrediction::base_class(s_.integer(0, cfg_.n_base - 1));
        } else {
            r.base_pred = BasePrediction::background();
        }
        r.objectness = object ? s_.uniform(0.5, 1.0) : s_.uniform(0.0, 0.5);

        if (with_embeddings) {
            FeatureRecord e = r;
            if (kind == ProposalKind::Diffuse) {
                e.feature = s_.direction(cfg_.embedding_dim);
            } else {
                e.feature = world_.text_embeddings[latent].embedding +
                            s_.gaussian(cfg_.embedding_dim,
                                        cfg_.embedding_sigma / std::sqrt(static_cast<double>(cfg_.embedding_dim)));
            }
            ds.embeddings.push_back(std::move(e));
        }
        ds.rpn.push_back(std::move(r));
        ds.truth.latent_class.push_back(latent);
        ds.truth.kind.push_back(kind);
    }

    const WorldConfig& cfg_;
    World& world_;
    Sampler& s_;
    std::vector<int> nearest_base_;
};

void validate(const WorldConfig& cfg) {
    if (cfg.dim < 1) throw DomainError("synthgen: dim must be positive");
    if (cfg.n_base < 0 || cfg.n_novel < 0 || cfg.n_base + cfg.n_novel < 1) {
        throw DomainError("synthgen: need at least one class");
    }
    if (cfg.sigma < 0 || cfg.clutter_sigma < 0 || cfg.embedding_sigma < 0) throw DomainError("synthgen: negative sigma");
    if (cfg.clutter_fraction < 0 || cfg.clutter_fraction >= 1) throw DomainError("synthgen: clutter_fraction in [0,1)");
    if (cfg.mislocalized_share < 0 || cfg.mislocalized_share > 1) throw DomainError("synthgen: mislocalized_share in [0,1]");
    if (cfg.flip_prob < 0 || cfg.flip_prob > 1) throw DomainError("synthgen: flip_prob in [0,1]");
    if (cfg.samples_per_class < 0 || cfg.discovery_base_fraction < 0) throw DomainError("synthgen: negative counts");
    if (cfg.embedding_dim < 1) throw DomainError("synthgen: embedding_dim must be positive");
}

}  // namespace

std::vector<double> zipf_pmf(int n, double s) {
    std::vector<double> p(static_cast<std::size_t>(std::max(n, 0)));
    double total = 0;
    for (int r = 1; r <= n; ++r) total += p[r - 1] = std::pow(static_cast<double>(r), -s);
    for (auto& v : p) v /= total;
    return p;
}

World generate(const WorldConfig& cfg) {
    validate(cfg);
    Sampler s(cfg.seed);
    World world;
    world.class_means = sample_class_means(cfg, s);
    const int n_classes = cfg.n_base + cfg.n_novel;
    for (int c = 0; c < n_classes; ++c) {
        const bool base = c < cfg.n_base;
        char name[32];
        std::snprintf(name, sizeof name, "%s_%02d", base ? "base" : "novel", base ? c : c - cfg.n_base);
        world.classes.push_back({c, name, base ? ClassKind::Base : ClassKind::Novel});
        world.text_embeddings.push_back({c, s.direction(cfg.embedding_dim)});
    }

    WorldBuilder builder(cfg, world, s);
    const int per = cfg.samples_per_class;

    Dataset base = builder.build(class_list(cfg, 0, cfg.n_base, per, s, false), kBaseImages, false, false);
    world.base_gt = std::move(base.gt);

    auto discovery_objects = class_list(cfg, cfg.n_base, cfg.n_novel, per, s, false);
    const int discovery_base = static_cast<int>(std::lround(cfg.discovery_base_fraction * per));
    const auto extra = class_list(cfg, 0, cfg.n_base, discovery_base, s, true);
    discovery_objects.insert(discovery_objects.end(), extra.begin(), extra.end());
    Dataset discovery = builder.build(std::move(discovery_objects), kDiscoveryImages, true, true);
    world.discovery_rpn = std::move(discovery.rpn);
    world.discovery_gt = std::move(discovery.gt);
    world.discovery_truth = std::move(discovery.truth);
    world.box_embeddings = std::move(discovery.embeddings);

    auto test_objects = class_list(cfg, 0, cfg.n_base, per, s, false);
    const auto test_novel = class_list(cfg, cfg.n_base, cfg.n_novel, per, s, false);
    test_objects.insert(test_objects.end(), test_novel.begin(), test_novel.end());
    Dataset test = builder.build(std::move(test_objects), kTestImages, true, false);
    world.test_rpn = std::move(test.rpn);
    world.test_gt = std::move(test.gt);
    world.test_truth = std::move(test.truth);
    return world;
}

WorldFiles world_files(const std::filesystem::path& dir) {
    return {dir / "base_gt.ncdf",         dir / "discovery_rpn.ncdf", dir / "discovery_gt.ncdf",
            dir / "test_rpn.ncdf",        dir / "test_gt.ncdf",       dir / "classes.jsonl",
            dir / "truth.json",           dir / "box_embeddings.ncde", dir / "text_embeddings.jsonl"};
}

WorldFiles write_world(const World& world, const WorldConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const WorldFiles files = world_files(dir);
    const auto dim = static_cast<std::uint32_t>(config.dim);
    write_feature_file(files.base_gt, world.base_gt, dim);
    write_feature_file(files.discovery_rpn, world.discovery_rpn, dim);
    write_feature_file(files.discovery_gt, world.discovery_gt, dim);
    write_feature_file(files.test_rpn, world.test_rpn, dim);
    write_feature_file(files.test_gt, world.test_gt, dim);
    write_feature_file(files.box_embeddings, world.box_embeddings, static_cast<std::uint32_t>(config.embedding_dim),
                       kEmbeddingMagic);
    write_class_table(files.classes, world.classes);
    write_text_embeddings(files.text_embeddings, world.text_embeddings);

    auto truth_json = [](const ProposalTruth& t) {
        std::vector<int> kinds;
        for (auto k : t.kind) kinds.push_back(static_cast<int>(k));
        return nlohmann::json{{"latent_class", t.latent_class}, {"kind", kinds}};
    };
    nlohmann::json truth = {{"seed", config.seed},
                            {"dim", config.dim},
                            {"n_base", config.n_base},
                            {"n_novel", config.n_novel},
                            {"sigma", config.sigma},
                            {"discovery_rpn", truth_json(world.discovery_truth)},
                            {"test_rpn", truth_json(world.test_truth)}};
    std::ofstream out(files.truth, std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot write '" + files.truth.string() + "'");
    out << truth.dump() << '\n';
    return files;
}

}  // namespace ncd
