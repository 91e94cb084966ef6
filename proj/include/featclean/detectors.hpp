#pragma once

#include "featclean/common.hpp"
#include "featclean/eval.hpp"
#include "featclean/hoc.hpp"
#include "featclean/knn.hpp"
#include "featclean/random.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace featclean {

enum class Method { Vote, Rank };
enum class NoiseSource { Hoc, User };

const char* to_string(Method m);
const char* to_string(NoiseSource s);
Method method_from_string(const std::string& s);
NoiseSource noise_source_from_string(const std::string& s);

struct DetectorConfig {
    Method method = Method::Vote;
    int k = 10;
    int epochs = 21;  // odd
    std::uint64_t seed = 0;
    Weighting weighting = Weighting::Uniform;
    bool include_self = true;
    double jitter = 0.0;
    NoiseSource noise_source = NoiseSource::Hoc;
    std::optional<NoiseModel> user_noise_model;
    int hoc_restarts = 10;
    int hoc_max_iterations = 1500;
    unsigned threads = 0;  // never affects results

    /// Throws ConfigError on an invalid combination.
    void validate() const;
};

/// Dataset as seen by the detectors: features plus 0-based labels.
struct LabeledDataset {
    FeatureMatrix features;
    LabelVector noisy_labels;
    std::optional<LabelVector> clean_labels;
    int n_classes = 0;

    /// Throws ValidationError when labels and features disagree.
    void validate() const;
};

/// Indices grouped by noisy label, in increasing index order.
struct ClassPartition {
    std::vector<std::vector<Eigen::Index>> members;

    static ClassPartition from_labels(const LabelVector& labels, int n_classes);
    Eigen::Index count(int j) const { return static_cast<Eigen::Index>(members[static_cast<std::size_t>(j)].size()); }
};

/// Cosine between a soft label and the one-hot e_j: y[j] / ||y||_2.
template <typename Derived>
typename Derived::Scalar cosine_score(const Eigen::MatrixBase<Derived>& soft_label, int j) {
    const auto norm = soft_label.norm();
    if (!(norm > 0)) throw DomainError("cosine_score: zero soft label");
    if (j < 0 || j >= soft_label.size()) throw DomainError("cosine_score: class out of range");
    return soft_label.coeff(j) / norm;
}

/// argmax with uniform tie-breaking. Entries within a relative 1e-12 of the
/// maximum count as tied.
int vote_label(const Eigen::Ref<const Eigen::VectorXd>& soft_label, Rng& rng);

FlagVector vote_detect(const SoftLabelMatrix& soft, const LabelVector& noisy_labels, Rng& rng);

struct RankResult {
    FlagVector flags;
    std::vector<double> scores;        // cosine score against the noisy label
    std::vector<long> thresholds;      // flagged count per class
    std::vector<int> clipped_classes;  // posterior entries clipped into [0, 1]
};

/// floor((1 - posterior) * N_j), guarded against round-off just below an
/// integer.
long rank_threshold(double posterior, Eigen::Index class_size);

/// Per noisy class, flags the `rank_threshold` lowest-scoring members
/// (ascending score, ties by smaller index).
RankResult rank_detect(const SoftLabelMatrix& soft, const LabelVector& noisy_labels,
                       const Eigen::Ref<const Eigen::VectorXd>& posterior);

/// Strict majority: flagged in more than half of the epochs.
FlagVector majority_over_epochs(const std::vector<FlagVector>& per_epoch);

struct DetectionReport {
    Eigen::Index n_instances = 0;
    int n_classes = 0;
    FlagVector flags;
    std::vector<FlagVector> per_epoch_flags;
    std::optional<std::vector<double>> scores;   // rank mode, mean over epochs
    std::optional<std::vector<long>> thresholds;  // rank mode, last epoch
    std::optional<std::vector<double>> posterior; // rank mode, last epoch
    std::optional<NoiseModel> noise_model;        // rank mode, last estimate
    DetectorConfig config;
    std::map<std::string, std::string> inputs;    // file paths, informational
    std::optional<DetectionMetrics> evaluation;
    std::vector<std::string> warnings;

    long flagged_count() const;
};

bool operator==(const DetectionReport& a, const DetectionReport& b);

/// Multi-epoch detection: per epoch optional jitter, k-NN soft labels, then
/// vote or rank; final flags by strict majority.
DetectionReport run_pipeline(const LabeledDataset& dataset, const DetectorConfig& config);

} // namespace featclean
