#include "ncd/kmeans.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ncd/error.hpp"
#include "ncd/vecmath.hpp"

namespace ncd {

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(restart + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Mat<Scalar> init_random_sample(const Mat<Scalar>& points, int q, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(points.cols());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < static_cast<std::size_t>(q); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    Mat<Scalar> centers(points.rows(), q);
    for (int k = 0; k < q; ++k) centers.col(k) = points.col(static_cast<Eigen::Index>(idx[k]));
    return centers;
}

template <typename Scalar>
Mat<Scalar> init_plus_plus(const Mat<Scalar>& points, int q, std::mt19937_64& rng) {
    const Eigen::Index n = points.cols();
    Mat<Scalar> centers(points.rows(), q);
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);

    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    Eigen::Index pick = first(rng);
    for (int k = 0; k < q; ++k) {
        if (k > 0) {
            double total = 0;
            for (Eigen::Index i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
            if (total > 0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double r = u(rng);
                pick = -1;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (chosen[i] || d2[i] <= 0) continue;
                    pick = i;
                    r -= d2[i];
                    if (r < 0) break;
                }
            } else {
                // every remaining point coincides with a center
                std::vector<Eigen::Index> rest;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (!chosen[i]) rest.push_back(i);
                }
                std::uniform_int_distribution<std::size_t> any(0, rest.size() - 1);
                pick = rest[any(rng)];
            }
        }
        chosen[pick] = 1;
        centers.col(k) = points.col(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], static_cast<double>((points.col(i) - centers.col(k)).squaredNorm()));
        }
    }
    return centers;
}

template <typename Scalar>
KMeansResult<Scalar> run_restart(const Mat<Scalar>& points, const KMeansConfig& cfg, std::uint64_t seed) {
    const Eigen::Index n = points.cols();
    const int q = cfg.q;
    std::mt19937_64 rng(seed);

    KMeansResult<Scalar> res;
    res.centers = cfg.init == KMeansInit::PlusPlus ? init_plus_plus(points, q, rng) : init_random_sample(points, q, rng);
    res.assignments.assign(static_cast<std::size_t>(n), -1);

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(q));
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iter; ++it) {
        bool changed = false;
        std::fill(counts.begin(), counts.end(), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = static_cast<int>(nearest_column(points.col(i), res.centers));
            if (k != res.assignments[i]) {
                changed = true;
                res.assignments[i] = k;
            }
            ++counts[k];
        }

        bool repaired = false;
        for (int empty = 0; empty < q; ++empty) {
            if (counts[empty] > 0) continue;
            const auto largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            Eigen::Index far = -1;
            Scalar far_d2 = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (res.assignments[i] != largest) continue;
                const Scalar d2 = (points.col(i) - res.centers.col(largest)).squaredNorm();
                if (d2 > far_d2) {
                    far_d2 = d2;
                    far = i;
                }
            }
            res.assignments[far] = empty;
            --counts[largest];
            ++counts[empty];
            res.centers.col(empty) = points.col(far);
            repaired = true;
        }

        res.centers.setZero();
        for (Eigen::Index i = 0; i < n; ++i) res.centers.col(res.assignments[i]) += points.col(i);
        for (int k = 0; k < q; ++k) res.centers.col(k) /= static_cast<Scalar>(counts[k]);

        double inertia = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += static_cast<double>((points.col(i) - res.centers.col(res.assignments[i])).squaredNorm());
        }
        res.inertia = static_cast<Scalar>(inertia);
        res.inertia_trace.push_back(res.inertia);
        res.iterations_run = it + 1;

        if (!changed && !repaired) break;
        if (cfg.tol > 0 && std::isfinite(prev) && (prev <= 0 || (prev - inertia) < cfg.tol * prev)) break;
        prev = inertia;
    }
    return res;
}

}  // namespace

template <typename Scalar>
KMeansResult<Scalar> kmeans(const Mat<Scalar>& points, const KMeansConfig& config) {
    if (config.q <= 0) throw DomainError("kmeans: q must be positive");
    if (config.q > points.cols()) {
        throw DomainError("kmeans: q = " + std::to_string(config.q) + " exceeds the number of points (" +
                          std::to_string(points.cols()) + ")");
    }
    if (config.max_iter <= 0 || config.retries <= 0) throw DomainError("kmeans: max_iter and retries must be positive");
    if (config.tol < 0) throw DomainError("kmeans: tol must be nonnegative");
    if (!points.allFinite()) throw DomainError("kmeans: non-finite input");

    std::vector<KMeansResult<Scalar>> runs(static_cast<std::size_t>(config.retries));
    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        for (int r = 0; r < config.retries; ++r) runs[r] = run_restart(points, config, restart_seed(config.seed, r));
    } else {
        for (int start = 0; start < config.retries; start += threads) {
            std::vector<std::future<KMeansResult<Scalar>>> batch;
            for (int r = start; r < std::min(config.retries, start + threads); ++r) {
                batch.push_back(std::async(std::launch::async, [&points, &config, r] {
                    return run_restart(points, config, restart_seed(config.seed, r));
                }));
            }
            for (std::size_t b = 0; b < batch.size(); ++b) runs[start + b] = batch[b].get();
        }
    }

    int best = 0;
    for (int r = 1; r < config.retries; ++r) {
        if (runs[r].inertia < runs[best].inertia) best = r;
    }
    KMeansResult<Scalar> out = std::move(runs[best]);
    out.restart_chosen = best;
    out.restart_inertias.reserve(runs.size());
    for (int r = 0; r < config.retries; ++r) {
        out.restart_inertias.push_back(r == best ? out.inertia : runs[r].inertia);
    }
    return out;
}

template KMeansResult<float> kmeans(const Eigen::MatrixXf&, const KMeansConfig&);
template KMeansResult<double> kmeans(const Eigen::MatrixXd&, const KMeansConfig&);

}  // namespace ncd
