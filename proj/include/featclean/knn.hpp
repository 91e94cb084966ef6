#pragma once

#include "featclean/common.hpp"

#include <cmath>
#include <cstdint>

namespace featclean {

/// Scales every row to unit L2 norm. Rows with zero (or non-finite) norm are
/// rejected with a ValidationError naming the row.
template <typename Derived>
RowMatrix<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    RowMatrix<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Scalar sq = 0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) sq += x(r, c) * x(r, c);
        const Scalar norm = std::sqrt(sq);
        if (!(norm > 0) || !std::isfinite(norm)) {
            throw ValidationError("feature row " + std::to_string(r) + " has zero norm");
        }
        for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / norm;
    }
    return out;
}

/// Left-to-right dot product. Every similarity stored in a KnnIndex is
/// computed with this exact summation order.
template <typename A, typename B>
typename A::Scalar sequential_dot(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    typename A::Scalar acc = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc += a.coeff(i) * b.coeff(i);
    return acc;
}

struct KnnIndex {
    FeatureMatrix normalized_features;
    RowMatrixXi neighbor_ids;   // N x k, self excluded
    RowMatrixXd neighbor_sims;  // N x k, non-increasing per row
    int k = 0;

    Eigen::Index size() const { return normalized_features.rows(); }
};

struct KnnOptions {
    bool normalize = true;  // false: rows are already unit norm
    unsigned threads = 0;
    Eigen::Index block_rows = 256;
};

/// Exact cosine k-NN. Candidates are screened with blocked matrix products
/// and re-scored with `sequential_dot`; ties are broken by the smaller row
/// index.
KnnIndex build_index(const FeatureMatrix& features, int k, const KnnOptions& options = {});

/// Copy of `index` restricted to the first `k` neighbors of each row.
KnnIndex truncate_index(const KnnIndex& index, int k);

enum class Weighting { Uniform, Similarity };

struct SoftLabelMatrix {
    RowMatrixXd values;  // N x K, rows on the simplex
    Weighting weighting = Weighting::Uniform;
};

/// k-NN label estimator. With `include_self` the instance counts as one of
/// k+1 observations (self-similarity 1).
SoftLabelMatrix knn_soft_labels(const KnnIndex& index, const LabelVector& noisy_labels, int n_classes,
                                bool include_self = true, Weighting weighting = Weighting::Uniform);

/// Adds i.i.d. N(0, sigma^2) noise to every entry and re-normalizes rows.
/// sigma == 0 returns an exact copy.
FeatureMatrix perturb_features(const FeatureMatrix& features, double sigma, std::uint64_t seed);

const char* to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

} // namespace featclean
