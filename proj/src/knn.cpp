#include "featclean/knn.hpp"

#include "featclean/parallel.hpp"
#include "featclean/random.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace featclean {

namespace {

// Upper bound on |gemm - sequential_dot| for unit rows; anything within this
// of the k-th screened similarity is re-scored exactly.
constexpr double kScreenSlack = 1e-9;

// Cap on the doubles held by one block of the similarity matrix.
constexpr Eigen::Index kBlockBudget = Eigen::Index{1} << 21;

struct Candidate {
    double sim;
    int id;
};

bool closer(const Candidate& a, const Candidate& b) {
    return a.sim > b.sim || (a.sim == b.sim && a.id < b.id);
}

void select_row(const FeatureMatrix& x, Eigen::Index row, const Eigen::Ref<const Eigen::RowVectorXd>& screened,
                int k, std::vector<Candidate>& scratch, KnnIndex& out) {
    const Eigen::Index n = x.rows();
    scratch.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j != row) scratch.push_back({screened(j), static_cast<int>(j)});
    }
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(), closer);
    const double cutoff = scratch[static_cast<std::size_t>(k - 1)].sim - kScreenSlack;

    auto keep_end = std::partition(scratch.begin(), scratch.end(),
                                   [cutoff](const Candidate& c) { return c.sim >= cutoff; });
    for (auto it = scratch.begin(); it != keep_end; ++it) {
        it->sim = sequential_dot(x.row(row), x.row(it->id));
    }
    std::partial_sort(scratch.begin(), scratch.begin() + k, keep_end, closer);
    for (int m = 0; m < k; ++m) {
        out.neighbor_ids(row, m) = scratch[static_cast<std::size_t>(m)].id;
        out.neighbor_sims(row, m) = scratch[static_cast<std::size_t>(m)].sim;
    }
}

void check_labels(const LabelVector& labels, Eigen::Index n, int n_classes) {
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw ValidationError("label count " + std::to_string(labels.size()) + " does not match " +
                              std::to_string(n) + " feature rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                                  " is outside [0, " + std::to_string(n_classes) + ")");
        }
    }
}

} // namespace

KnnIndex build_index(const FeatureMatrix& features, int k, const KnnOptions& options) {
    const Eigen::Index n = features.rows();
    if (k < 1 || k >= n) {
        throw ConfigError("k must lie in [1, N-1]; got k=" + std::to_string(k) + " with N=" + std::to_string(n));
    }

    KnnIndex index;
    index.k = k;
    index.normalized_features = options.normalize ? normalize_rows(features) : features;
    index.neighbor_ids.resize(n, k);
    index.neighbor_sims.resize(n, k);

    const FeatureMatrix& x = index.normalized_features;
    const Eigen::Index block =
        std::clamp<Eigen::Index>(std::min(options.block_rows, kBlockBudget / std::max<Eigen::Index>(n, 1)), 1, n);

    parallel_chunks(static_cast<std::size_t>(n), static_cast<std::size_t>(block), options.threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        const auto b = static_cast<Eigen::Index>(begin);
                        const auto rows = static_cast<Eigen::Index>(end - begin);
                        const RowMatrixXd sims = x.middleRows(b, rows) * x.transpose();
                        std::vector<Candidate> scratch;
                        scratch.reserve(static_cast<std::size_t>(n));
                        for (Eigen::Index r = 0; r < rows; ++r) {
                            select_row(x, b + r, sims.row(r), k, scratch, index);
                        }
                    });
    return index;
}

KnnIndex truncate_index(const KnnIndex& index, int k) {
    if (k < 1 || k > index.k) {
        throw ConfigError("cannot truncate a " + std::to_string(index.k) + "-NN index to k=" + std::to_string(k));
    }
    KnnIndex out;
    out.k = k;
    out.normalized_features = index.normalized_features;
    out.neighbor_ids = index.neighbor_ids.leftCols(k);
    out.neighbor_sims = index.neighbor_sims.leftCols(k);
    return out;
}

SoftLabelMatrix knn_soft_labels(const KnnIndex& index, const LabelVector& noisy_labels, int n_classes,
                                bool include_self, Weighting weighting) {
    const Eigen::Index n = index.size();
    check_labels(noisy_labels, n, n_classes);

    SoftLabelMatrix soft;
    soft.weighting = weighting;
    soft.values = RowMatrixXd::Zero(n, n_classes);

    for (Eigen::Index r = 0; r < n; ++r) {
        auto row = soft.values.row(r);
        double total = 0.0;
        if (weighting == Weighting::Uniform) {
            // integer counts first so equal counts give bitwise-equal entries
            std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
            if (include_self) ++counts[static_cast<std::size_t>(noisy_labels[static_cast<std::size_t>(r)])];
            for (int m = 0; m < index.k; ++m) {
                ++counts[static_cast<std::size_t>(noisy_labels[static_cast<std::size_t>(index.neighbor_ids(r, m))])];
            }
            const double observations = index.k + (include_self ? 1 : 0);
            for (int c = 0; c < n_classes; ++c) row(c) = counts[static_cast<std::size_t>(c)] / observations;
            continue;
        }

        if (include_self) {
            row(noisy_labels[static_cast<std::size_t>(r)]) += 1.0;
            total += 1.0;
        }
        for (int m = 0; m < index.k; ++m) {
            const double w = std::max(index.neighbor_sims(r, m), 0.0);
            row(noisy_labels[static_cast<std::size_t>(index.neighbor_ids(r, m))]) += w;
            total += w;
        }
        if (total > 0) {
            row /= total;
        } else {
            // every neighbor anti-aligned and no self vote: fall back to counting
            row.setZero();
            for (int m = 0; m < index.k; ++m) {
                row(noisy_labels[static_cast<std::size_t>(index.neighbor_ids(r, m))]) += 1.0 / index.k;
            }
        }
    }
    return soft;
}

FeatureMatrix perturb_features(const FeatureMatrix& features, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0)) throw ConfigError("jitter sigma must be non-negative");
    if (sigma == 0) return features;
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    FeatureMatrix out = features;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += noise(rng);
    }
    return normalize_rows(out);
}

const char* to_string(Weighting w) {
    return w == Weighting::Uniform ? "uniform" : "similarity";
}

Weighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return Weighting::Uniform;
    if (s == "similarity") return Weighting::Similarity;
    throw ConfigError("unknown weighting '" + s + "' (expected uniform|similarity)");
}

} // namespace featclean
