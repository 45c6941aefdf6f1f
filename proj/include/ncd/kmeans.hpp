#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ncd {

enum class KMeansInit { RandomSample, PlusPlus };

struct KMeansConfig {
    int q = 1;
    int max_iter = 1000;
    int retries = 10;
    std::uint64_t seed = 0;
    double tol = 0.0;  // stop once (prev - cur) / prev < tol; 0 runs to max_iter or a fixed point
    KMeansInit init = KMeansInit::PlusPlus;
    int threads = 1;   // restarts run concurrently up to this many

    static KMeansConfig voc(int q) { return {q, 1000, 10}; }
    static KMeansConfig lvis(int q) { return {q, 250, 5}; }
};

template <typename Scalar>
struct KMeansResult {
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    MatrixType centers;             // dim x q
    std::vector<int> assignments;   // per point, in [0, q)
    Scalar inertia = 0;             // sum of squared distances to the assigned centers
    int iterations_run = 0;
    int restart_chosen = 0;
    std::vector<Scalar> inertia_trace;      // chosen restart, one entry per Lloyd iteration
    std::vector<Scalar> restart_inertias;   // final inertia of every restart
};

/// Lloyd's algorithm over the columns of `points` (dim x n), best of `config.retries` seeded restarts.
///
/// Each iteration assigns every point to its nearest center, repairs empty clusters by
/// moving the farthest member of the largest cluster into them, then recomputes means.
/// Iteration stops at max_iter, at a fixed point of the assignment, or once the relative
/// inertia improvement drops below tol. Points are not normalized here.
template <typename Scalar>
KMeansResult<Scalar> kmeans(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& points,
                            const KMeansConfig& config);

/// Per-restart seed derived from the run seed.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

extern template KMeansResult<float> kmeans(const Eigen::MatrixXf&, const KMeansConfig&);
extern template KMeansResult<double> kmeans(const Eigen::MatrixXd&, const KMeansConfig&);

}  // namespace ncd
