#pragma once

#include "featclean/common.hpp"

#include <cstdint>
#include <string>

namespace featclean {

enum class NoiseKind { Symmetric, Asymmetric, Instance };

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

/// Flips each label with probability `eta` to one of the other K - 1 classes,
/// chosen uniformly.
LabelVector inject_symmetric(const LabelVector& labels, int n_classes, double eta, std::uint64_t seed);

/// Flips label i with probability `eta` to (i + 1) mod K.
LabelVector inject_asymmetric(const LabelVector& labels, int n_classes, double eta, std::uint64_t seed);

struct InstanceNoiseOptions {
    double rate_std = 0.1;  // std of the per-instance flip rate before truncation
};

/// Feature-dependent flips. Each class owns a d x K Gaussian projection; an
/// instance's flip rate q_n ~ N(eta, rate_std^2) truncated to [0, 1] is spread
/// over the wrong classes by a softmax of its projection.
LabelVector inject_instance_dependent(const FeatureMatrix& features, const LabelVector& labels, int n_classes,
                                      double eta, std::uint64_t seed, const InstanceNoiseOptions& options = {});

double corruption_fraction(const LabelVector& clean, const LabelVector& noisy);

} // namespace featclean
