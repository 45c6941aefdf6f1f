#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ncd/error.hpp"

namespace ncd {

/// Similarity S(f, p) between a feature and a prototype. Higher is more similar for every kind.
struct SimilarityMetric {
    enum class Kind { InvSqEuclidean, DotProduct, Cosine };

    Kind kind = Kind::InvSqEuclidean;
    int gamma = 2;  // exponent applied to 1/d^2, InvSqEuclidean only

    static SimilarityMetric inv_sq_euclidean(int gamma = 2) { return {Kind::InvSqEuclidean, gamma}; }
    static SimilarityMetric dot_product() { return {Kind::DotProduct, 1}; }
    static SimilarityMetric cosine() { return {Kind::Cosine, 1}; }

    /// Nonnegative metrics can be L1-normalized without shifting.
    bool is_nonnegative() const noexcept { return kind == Kind::InvSqEuclidean; }

    friend bool operator==(const SimilarityMetric&, const SimilarityMetric&) = default;
};

std::string to_string(SimilarityMetric metric);
SimilarityMetric similarity_metric_from_string(const std::string& name, int gamma);

/// Squared distances below this are clamped so (d^2)^-gamma stays finite.
inline constexpr double kMinSquaredDistance = 1e-12;

template <typename Derived>
typename Derived::PlainObject l2_normalize(const Eigen::MatrixBase<Derived>& v) {
    using Real = typename Derived::RealScalar;
    if (!v.allFinite()) throw DomainError("l2_normalize: non-finite entry");
    const Real norm = v.norm();
    if (!(norm > Real(0))) throw DomainError("l2_normalize: zero-norm vector");
    return v / norm;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_euclidean(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) {
        throw DomainError("squared_euclidean: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    }
    return (a - b).squaredNorm();
}

template <typename DerivedF, typename DerivedP>
typename DerivedF::Scalar similarity(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedP>& p,
                                     SimilarityMetric metric) {
    using S = typename DerivedF::Scalar;
    if (f.size() != p.size()) throw DomainError("similarity: dimension mismatch");
    switch (metric.kind) {
        case SimilarityMetric::Kind::InvSqEuclidean: {
            if (metric.gamma <= 0) throw DomainError("similarity: gamma must be positive");
            const S d2 = std::max<S>((f - p).squaredNorm(), S(kMinSquaredDistance));
            return std::pow(d2, S(-metric.gamma));
        }
        case SimilarityMetric::Kind::DotProduct:
            return p.dot(f) - S(0.5) * p.dot(p);
        case SimilarityMetric::Kind::Cosine: {
            const S nf = f.norm();
            const S np = p.norm();
            if (!(nf > S(0)) || !(np > S(0))) throw DomainError("similarity: cosine of a zero vector");
            return f.dot(p) / (nf * np);
        }
    }
    throw DomainError("similarity: unknown metric");
}

/// Similarities of one feature against every column of `prototypes`.
template <typename DerivedF, typename DerivedP>
Eigen::Matrix<typename DerivedF::Scalar, Eigen::Dynamic, 1> similarities(const Eigen::MatrixBase<DerivedF>& f,
                                                                         const Eigen::MatrixBase<DerivedP>& prototypes,
                                                                         SimilarityMetric metric) {
    Eigen::Matrix<typename DerivedF::Scalar, Eigen::Dynamic, 1> out(prototypes.cols());
    for (Eigen::Index j = 0; j < prototypes.cols(); ++j) out(j) = similarity(f, prototypes.col(j), metric);
    return out;
}

/// Index of the first maximum (ties resolve to the lowest index). Returns -1 for an empty vector.
template <typename Derived>
Eigen::Index argmax_first(const Eigen::MatrixBase<Derived>& v) {
    Eigen::Index best = v.size() > 0 ? 0 : -1;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

/// Column of `centers` nearest to `x` in squared Euclidean distance, ties to the lowest index.
template <typename DerivedX, typename DerivedC>
Eigen::Index nearest_column(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedC>& centers,
                            typename DerivedX::Scalar* out_d2 = nullptr) {
    using S = typename DerivedX::Scalar;
    Eigen::Index best = -1;
    S best_d2 = std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
        const S d2 = (x - centers.col(j)).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = j;
        }
    }
    if (out_d2) *out_d2 = best_d2;
    return best;
}

}  // namespace ncd
