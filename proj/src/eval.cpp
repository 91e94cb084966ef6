#include "featclean/eval.hpp"

#include "featclean/knn.hpp"

namespace featclean {

namespace {

std::optional<double> harmonic(const std::optional<double>& p, const std::optional<double>& r) {
    if (!p || !r) return std::nullopt;
    if (*p <= 0 || *r <= 0) return 0.0;
    return 2.0 / (1.0 / *p + 1.0 / *r);
}

} // namespace

DetectionMetrics detection_metrics(const FlagVector& flags, const LabelVector& noisy_labels,
                                   const LabelVector& clean_labels) {
    if (flags.size() != noisy_labels.size() || noisy_labels.size() != clean_labels.size()) {
        throw ValidationError("flags, noisy labels and clean labels must have equal length");
    }
    DetectionMetrics m;
    long clean_kept = 0;  // not flagged and clean
    long kept = 0;
    for (std::size_t n = 0; n < flags.size(); ++n) {
        const bool corrupted = noisy_labels[n] != clean_labels[n];
        m.corrupted_total += corrupted;
        m.flagged_total += flags[n];
        if (flags[n] && corrupted) ++m.tp;
        if (flags[n] && !corrupted) ++m.fp;
        if (!flags[n] && corrupted) ++m.fn;
        if (!flags[n]) {
            ++kept;
            clean_kept += !corrupted;
        }
    }

    m.precision = m.flagged_total > 0 ? static_cast<double>(m.tp) / m.flagged_total : 0.0;
    if (m.corrupted_total > 0) {
        m.recall = static_cast<double>(m.tp) / m.corrupted_total;
        m.f1 = m.tp == 0 ? 0.0 : *harmonic(m.precision, m.recall);
    } else {
        m.precision.reset();
    }

    const long clean_total = static_cast<long>(flags.size()) - m.corrupted_total;
    m.clean_precision = kept > 0 ? static_cast<double>(clean_kept) / kept : 0.0;
    if (clean_total > 0) {
        m.clean_recall = static_cast<double>(clean_kept) / clean_total;
        m.clean_f1 = clean_kept == 0 ? 0.0 : *harmonic(m.clean_precision, m.clean_recall);
    } else {
        m.clean_precision.reset();
    }
    return m;
}

std::vector<double> delta_k_profile(const FeatureMatrix& features, const LabelVector& clean_labels, int k_max,
                                    unsigned threads) {
    if (static_cast<Eigen::Index>(clean_labels.size()) != features.rows()) {
        throw ValidationError("clean label count does not match feature rows");
    }
    KnnOptions options;
    options.threads = threads;
    const KnnIndex index = build_index(features, k_max, options);

    // first neighbor rank at which the clean class changes (k_max if never)
    std::vector<long> violations_at(static_cast<std::size_t>(k_max) + 1, 0);
    for (Eigen::Index n = 0; n < index.size(); ++n) {
        const int own = clean_labels[static_cast<std::size_t>(n)];
        for (int m = 0; m < k_max; ++m) {
            if (clean_labels[static_cast<std::size_t>(index.neighbor_ids(n, m))] != own) {
                ++violations_at[static_cast<std::size_t>(m) + 1];
                break;
            }
        }
    }
    std::vector<double> profile(static_cast<std::size_t>(k_max));
    long cumulative = 0;
    for (int k = 1; k <= k_max; ++k) {
        cumulative += violations_at[static_cast<std::size_t>(k)];
        profile[static_cast<std::size_t>(k) - 1] = static_cast<double>(cumulative) / index.size();
    }
    return profile;
}

double delta_k(const FeatureMatrix& features, const LabelVector& clean_labels, int k, unsigned threads) {
    return delta_k_profile(features, clean_labels, k, threads).back();
}

} // namespace featclean
