#pragma once

#include "featclean/common.hpp"
#include "featclean/knn.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace featclean {

/// Clean prior, transition matrix and noisy-label marginal.
/// transition(i, j) = P(noisy = j | clean = i).
struct NoiseModel {
    Eigen::VectorXd prior;
    RowMatrixXd transition;
    Eigen::VectorXd noisy_marginal;

    int n_classes() const { return static_cast<int>(prior.size()); }
};

bool operator==(const NoiseModel& a, const NoiseModel& b);

/// Dense K x K x K tensor, index (i, j, l) -> (i*K + j)*K + l.
struct Tensor3 {
    int dim = 0;
    std::vector<double> data;

    Tensor3() = default;
    explicit Tensor3(int k) : dim(k), data(static_cast<std::size_t>(k) * k * k, 0.0) {}

    double& operator()(int i, int j, int l) { return data[(static_cast<std::size_t>(i) * dim + j) * dim + l]; }
    double operator()(int i, int j, int l) const {
        return data[(static_cast<std::size_t>(i) * dim + j) * dim + l];
    }
    double sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }
};

/// Empirical first/second/third-order label agreement over
/// (self, 1st neighbor, 2nd neighbor) triples.
struct ConsensusStats {
    Eigen::VectorXd nu1;
    RowMatrixXd nu2;
    Tensor3 nu3;

    int n_classes() const { return static_cast<int>(nu1.size()); }
};

ConsensusStats consensus_stats(const KnnIndex& index, const LabelVector& noisy_labels, int n_classes);

/// Moments implied by (prior, transition) under 2-NN clusterability.
ConsensusStats expected_consensus(const Eigen::VectorXd& prior, const RowMatrixXd& transition);

struct HocOptions {
    int restarts = 10;
    int max_iterations = 1500;
    double initial_damping = 1e-3;
    double tolerance = 1e-20;  // stop once an accepted step improves less than this
    double weight1 = 1.0;
    double weight2 = 1.0;
    double weight3 = 1.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct HocFit {
    NoiseModel model;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // best restart, one value per accepted step
};

double hoc_objective(const ConsensusStats& stats, const Eigen::VectorXd& prior, const RowMatrixXd& transition,
                     const HocOptions& options = {});

/// Gradient of `hoc_objective` with respect to [prior | transition row-major].
Eigen::VectorXd hoc_gradient(const ConsensusStats& stats, const Eigen::VectorXd& prior, const RowMatrixXd& transition,
                             const HocOptions& options = {});

/// Moment matching over the simplices by projected Levenberg-Marquardt,
/// best of `restarts` Dirichlet(1) prior initializations with the transition
/// started at 0.7 I + 0.3 / K. `noisy_marginal`
/// (counted label frequencies) is copied into the returned model; when
/// empty, nu1 is used.
HocFit fit_noise_model(const ConsensusStats& stats, const HocOptions& options = {},
                       const Eigen::VectorXd& noisy_marginal = {});

struct Posterior {
    Eigen::VectorXd values;             // P(clean = j | noisy = j)
    std::vector<int> clipped_classes;   // classes whose raw value left [0, 1]
};

/// Bayes' rule: prior_j * T(j, j) / q_j, clipped into [0, 1]. A class with
/// q_j == 0 gets posterior 1 (it has no members to rank) unless it is listed
/// in `present_classes`, in which case an InternalError is raised.
Posterior posterior_clean(const NoiseModel& model, const std::vector<int>& present_classes = {});

/// Euclidean projection onto the probability simplex.
template <typename Derived>
Vector<typename Derived::Scalar> project_to_simplex(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> flat = v.reshaped();
    const Eigen::Index n = flat.size();
    std::vector<Scalar> sorted(flat.data(), flat.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());
    Scalar cumulative = 0;
    Scalar theta = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += sorted[static_cast<std::size_t>(i)];
        const Scalar candidate = (cumulative - Scalar(1)) / Scalar(i + 1);
        if (sorted[static_cast<std::size_t>(i)] - candidate > 0) theta = candidate;
    }
    Vector<Scalar> out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = std::max(flat(i) - theta, Scalar(0));
    return out;
}

/// Counted frequency of each noisy label.
Eigen::VectorXd label_frequencies(const LabelVector& labels, int n_classes);

} // namespace featclean
