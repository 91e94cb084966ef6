#pragma once

#include "featclean/common.hpp"

#include <optional>
#include <vector>

namespace featclean {

struct DetectionMetrics {
    // Corrupted instances are the positive class. Undefined values stay empty
    // so that they serialize as null rather than 0.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long corrupted_total = 0;
    long flagged_total = 0;

    // Same quantities with clean instances as the positive class.
    std::optional<double> clean_precision;
    std::optional<double> clean_recall;
    std::optional<double> clean_f1;

    bool operator==(const DetectionMetrics&) const = default;
};

DetectionMetrics detection_metrics(const FlagVector& flags, const LabelVector& noisy_labels,
                                   const LabelVector& clean_labels);

/// Fraction of instances whose k nearest neighbors do not all share the
/// instance's clean class.
double delta_k(const FeatureMatrix& features, const LabelVector& clean_labels, int k, unsigned threads = 0);

/// delta_k for every k in [1, k_max], computed from a single index.
std::vector<double> delta_k_profile(const FeatureMatrix& features, const LabelVector& clean_labels, int k_max,
                                    unsigned threads = 0);

} // namespace featclean
