#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ncd/types.hpp"

namespace ncd {

enum class LabelDistribution { Uniform, LongTailed };

/// Synthetic feature world: Gaussian class clusters around unit mean directions, plus
/// two kinds of background proposals. Mislocalized proposals sit next to an object
/// (IoU well below 0.5) and look like it; diffuse proposals have random directions.
struct WorldConfig {
    int dim = 64;
    int n_base = 10;
    int n_novel = 10;
    double min_angle_deg = 30.0;     // pairwise separation of class mean directions
    double sigma = 0.05;             // class noise, E||noise||^2 = sigma^2
    int samples_per_class = 200;     // per dataset (base GT, discovery, test)
    double clutter_fraction = 0.3;   // share of RPN proposals that are background
    double mislocalized_share = 0.5; // share of the background that is mislocalized
    double clutter_sigma = 0.05;     // noise of mislocalized proposal features
    int objects_per_image = 4;
    double discovery_base_fraction = 0.0;  // base objects in the discovery set, relative to samples_per_class
    double flip_prob = 0.0;          // simulated base head errors: object <-> background
    LabelDistribution distribution = LabelDistribution::Uniform;
    double zipf_s = 1.0;
    int embedding_dim = 32;          // simulated vision-language embeddings
    double embedding_sigma = 0.3;
    std::uint64_t seed = 0;
};

enum class ProposalKind : std::int8_t { Object = 0, Mislocalized = 1, Diffuse = 2 };

/// Latent truth for every RPN record, index-aligned with the record list.
struct ProposalTruth {
    std::vector<ClassId> latent_class;  // -1 for diffuse proposals
    std::vector<ProposalKind> kind;
};

struct World {
    ClassTable classes;
    Matrix class_means;  // dim x (n_base + n_novel), column = class id
    std::vector<FeatureRecord> base_gt;
    std::vector<FeatureRecord> discovery_rpn;
    std::vector<FeatureRecord> discovery_gt;
    std::vector<FeatureRecord> test_rpn;
    std::vector<FeatureRecord> test_gt;
    ProposalTruth discovery_truth;
    ProposalTruth test_truth;
    std::vector<TextEmbedding> text_embeddings;
    std::vector<FeatureRecord> box_embeddings;  // aligned with discovery_rpn, feature = embedding
};

/// Deterministic for a fixed config. Throws DomainError when the separation constraint is infeasible.
World generate(const WorldConfig& config);

/// Class probabilities for LongTailed sampling: p(rank r) proportional to r^-s, r = 1..n.
std::vector<double> zipf_pmf(int n, double s);

struct WorldFiles {
    std::filesystem::path base_gt, discovery_rpn, discovery_gt, test_rpn, test_gt, classes, truth, box_embeddings,
        text_embeddings;
};

WorldFiles world_files(const std::filesystem::path& dir);
WorldFiles write_world(const World& world, const WorldConfig& config, const std::filesystem::path& dir);

}  // namespace ncd
