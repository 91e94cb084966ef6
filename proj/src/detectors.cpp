#include "featclean/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace featclean {

namespace {

template <typename A, typename B>
bool same_matrix(const A& a, const B& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_config(const DetectorConfig& a, const DetectorConfig& b) {
    return a.method == b.method && a.k == b.k && a.epochs == b.epochs && a.seed == b.seed &&
           a.weighting == b.weighting && a.include_self == b.include_self && a.jitter == b.jitter &&
           a.noise_source == b.noise_source && a.user_noise_model == b.user_noise_model &&
           a.hoc_restarts == b.hoc_restarts && a.hoc_max_iterations == b.hoc_max_iterations;
}

struct EpochModel {
    NoiseModel model;
    Eigen::VectorXd posterior;
    std::vector<std::string> warnings;
};

EpochModel estimate_model(const KnnIndex& index, const LabeledDataset& data, const DetectorConfig& config,
                          std::uint64_t hoc_seed) {
    EpochModel out;
    const Eigen::VectorXd counted = label_frequencies(data.noisy_labels, data.n_classes);
    if (config.noise_source == NoiseSource::User) {
        out.model = *config.user_noise_model;
        out.model.noisy_marginal = counted;
    } else {
        HocOptions options;
        options.restarts = config.hoc_restarts;
        options.max_iterations = config.hoc_max_iterations;
        options.seed = hoc_seed;
        options.threads = config.threads;
        const HocFit fit = fit_noise_model(consensus_stats(index, data.noisy_labels, data.n_classes), options, counted);
        out.model = fit.model;
        if (!fit.converged) {
            out.warnings.push_back("noise model fit stopped at the iteration limit; using the best iterate");
        }
    }

    std::vector<int> present;
    for (int j = 0; j < data.n_classes; ++j) {
        if (counted(j) > 0) present.push_back(j);
    }
    const Posterior posterior = posterior_clean(out.model, present);
    out.posterior = posterior.values;
    for (int j : posterior.clipped_classes) {
        out.warnings.push_back("posterior for class " + std::to_string(j) + " clipped into [0, 1]");
    }
    return out;
}

} // namespace

bool operator==(const NoiseModel& a, const NoiseModel& b) {
    return same_matrix(a.prior, b.prior) && same_matrix(a.transition, b.transition) &&
           same_matrix(a.noisy_marginal, b.noisy_marginal);
}

const char* to_string(Method m) { return m == Method::Vote ? "vote" : "rank"; }
const char* to_string(NoiseSource s) { return s == NoiseSource::Hoc ? "hoc" : "user"; }

Method method_from_string(const std::string& s) {
    if (s == "vote") return Method::Vote;
    if (s == "rank") return Method::Rank;
    throw ConfigError("unknown method '" + s + "' (expected vote|rank)");
}

NoiseSource noise_source_from_string(const std::string& s) {
    if (s == "hoc") return NoiseSource::Hoc;
    if (s == "user") return NoiseSource::User;
    throw ConfigError("unknown noise source '" + s + "' (expected hoc|user)");
}

void DetectorConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (epochs < 1 || epochs % 2 == 0) throw ConfigError("epochs must be a positive odd number");
    if (!(jitter >= 0.0)) throw ConfigError("jitter sigma must be non-negative");
    if (hoc_restarts < 1) throw ConfigError("at least one HOC restart is required");
    if (hoc_max_iterations < 1) throw ConfigError("HOC needs a positive iteration limit");
    if (method == Method::Rank && noise_source == NoiseSource::User && !user_noise_model) {
        throw ConfigError("noise source 'user' requires a noise model");
    }
}

void LabeledDataset::validate() const {
    if (features.rows() < 1 || features.cols() < 1) throw ValidationError("feature matrix is empty");
    if (n_classes < 1) throw ValidationError("number of classes must be positive");
    const auto n = static_cast<std::size_t>(features.rows());
    if (noisy_labels.size() != n) {
        throw ValidationError("noisy label count " + std::to_string(noisy_labels.size()) + " does not match " +
                              std::to_string(n) + " feature rows");
    }
    if (clean_labels && clean_labels->size() != noisy_labels.size()) {
        throw ValidationError("clean and noisy label counts differ");
    }
    auto check = [&](const LabelVector& labels, const char* what) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= n_classes) {
                throw ValidationError(std::string(what) + " label " + std::to_string(labels[i]) + " at index " +
                                      std::to_string(i) + " is outside [0, " + std::to_string(n_classes) + ")");
            }
        }
    };
    check(noisy_labels, "noisy");
    if (clean_labels) check(*clean_labels, "clean");
}

ClassPartition ClassPartition::from_labels(const LabelVector& labels, int n_classes) {
    ClassPartition p;
    p.members.resize(static_cast<std::size_t>(n_classes));
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || labels[n] >= n_classes) throw ValidationError("label out of range");
        p.members[static_cast<std::size_t>(labels[n])].push_back(static_cast<Eigen::Index>(n));
    }
    return p;
}

int vote_label(const Eigen::Ref<const Eigen::VectorXd>& soft_label, Rng& rng) {
    const double peak = soft_label.maxCoeff();
    const double floor = peak - std::abs(peak) * 1e-12;
    std::vector<int> tied;
    for (Eigen::Index i = 0; i < soft_label.size(); ++i) {
        if (soft_label(i) >= floor) tied.push_back(static_cast<int>(i));
    }
    if (tied.size() == 1) return tied.front();
    std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
    return tied[pick(rng)];
}

FlagVector vote_detect(const SoftLabelMatrix& soft, const LabelVector& noisy_labels, Rng& rng) {
    if (static_cast<Eigen::Index>(noisy_labels.size()) != soft.values.rows()) {
        throw ValidationError("soft labels and noisy labels disagree in length");
    }
    FlagVector flags(noisy_labels.size(), false);
    for (Eigen::Index n = 0; n < soft.values.rows(); ++n) {
        const int vote = vote_label(soft.values.row(n).transpose(), rng);
        flags[static_cast<std::size_t>(n)] = vote != noisy_labels[static_cast<std::size_t>(n)];
    }
    return flags;
}

long rank_threshold(double posterior, Eigen::Index class_size) {
    const double p = std::clamp(posterior, 0.0, 1.0);
    const double raw = (1.0 - p) * static_cast<double>(class_size);
    return std::clamp(static_cast<long>(std::floor(raw + 1e-9)), 0L, static_cast<long>(class_size));
}

RankResult rank_detect(const SoftLabelMatrix& soft, const LabelVector& noisy_labels,
                       const Eigen::Ref<const Eigen::VectorXd>& posterior) {
    const Eigen::Index n = soft.values.rows();
    const int k = static_cast<int>(soft.values.cols());
    if (static_cast<Eigen::Index>(noisy_labels.size()) != n) {
        throw ValidationError("soft labels and noisy labels disagree in length");
    }
    if (posterior.size() != k) throw ValidationError("posterior has the wrong number of classes");

    RankResult out;
    out.flags.assign(static_cast<std::size_t>(n), false);
    out.scores.resize(static_cast<std::size_t>(n));
    out.thresholds.assign(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.scores[static_cast<std::size_t>(i)] =
            cosine_score(soft.values.row(i).transpose(), noisy_labels[static_cast<std::size_t>(i)]);
    }

    ClassPartition partition = ClassPartition::from_labels(noisy_labels, k);
    for (int j = 0; j < k; ++j) {
        if (posterior(j) < 0.0 || posterior(j) > 1.0) out.clipped_classes.push_back(j);
        auto& members = partition.members[static_cast<std::size_t>(j)];
        std::stable_sort(members.begin(), members.end(), [&](Eigen::Index a, Eigen::Index b) {
            return out.scores[static_cast<std::size_t>(a)] < out.scores[static_cast<std::size_t>(b)];
        });
        const long cut = rank_threshold(posterior(j), partition.count(j));
        out.thresholds[static_cast<std::size_t>(j)] = cut;
        for (long m = 0; m < cut; ++m) out.flags[static_cast<std::size_t>(members[static_cast<std::size_t>(m)])] = true;
    }
    return out;
}

FlagVector majority_over_epochs(const std::vector<FlagVector>& per_epoch) {
    if (per_epoch.empty()) return {};
    const std::size_t n = per_epoch.front().size();
    std::vector<std::size_t> votes(n, 0);
    for (const auto& epoch : per_epoch) {
        if (epoch.size() != n) throw InternalError("epoch flag vectors differ in length");
        for (std::size_t i = 0; i < n; ++i) votes[i] += epoch[i];
    }
    FlagVector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 2 * votes[i] > per_epoch.size();
    return out;
}

long DetectionReport::flagged_count() const {
    return static_cast<long>(std::count(flags.begin(), flags.end(), true));
}

bool operator==(const DetectionReport& a, const DetectionReport& b) {
    return a.n_instances == b.n_instances && a.n_classes == b.n_classes && a.flags == b.flags &&
           a.per_epoch_flags == b.per_epoch_flags && a.scores == b.scores && a.thresholds == b.thresholds &&
           a.posterior == b.posterior && a.noise_model == b.noise_model && same_config(a.config, b.config) &&
           a.inputs == b.inputs && a.evaluation == b.evaluation && a.warnings == b.warnings;
}

DetectionReport run_pipeline(const LabeledDataset& dataset, const DetectorConfig& config) {
    dataset.validate();
    config.validate();
    if (config.user_noise_model && config.noise_source == NoiseSource::User &&
        config.user_noise_model->n_classes() != dataset.n_classes) {
        throw ConfigError("user noise model has " + std::to_string(config.user_noise_model->n_classes()) +
                          " classes, dataset has " + std::to_string(dataset.n_classes));
    }

    const bool rank = config.method == Method::Rank;
    const bool hoc = rank && config.noise_source == NoiseSource::Hoc;
    const int index_k = hoc ? std::max(config.k, 2) : config.k;
    const Eigen::Index n = dataset.features.rows();
    if (index_k >= n) {
        throw ConfigError("k=" + std::to_string(index_k) + " needs more than " + std::to_string(n) + " instances");
    }

    KnnOptions knn_options;
    knn_options.threads = config.threads;
    const FeatureMatrix base = normalize_rows(dataset.features);
    knn_options.normalize = false;

    // Without jitter every epoch sees the same geometry: build the index,
    // soft labels and noise model once.
    const bool fixed_geometry = config.jitter == 0.0;
    std::optional<KnnIndex> shared_index;
    std::optional<SoftLabelMatrix> shared_soft;
    std::optional<EpochModel> shared_model;
    if (fixed_geometry) {
        shared_index = build_index(base, index_k, knn_options);
        shared_soft = knn_soft_labels(index_k == config.k ? *shared_index : truncate_index(*shared_index, config.k),
                                      dataset.noisy_labels, dataset.n_classes, config.include_self, config.weighting);
        if (rank) shared_model = estimate_model(*shared_index, dataset, config, derive_seed(config.seed, Stream::HocRestart));
    }

    DetectionReport report;
    report.n_instances = n;
    report.n_classes = dataset.n_classes;
    report.config = config;
    report.per_epoch_flags.reserve(static_cast<std::size_t>(config.epochs));
    std::vector<double> score_sum;
    std::set<std::string> seen_warnings;
    auto warn = [&](const std::vector<std::string>& messages) {
        for (const auto& m : messages) {
            if (seen_warnings.insert(m).second) report.warnings.push_back(m);
        }
    };

    for (int m = 0; m < config.epochs; ++m) {
        const auto epoch = static_cast<std::uint64_t>(m);
        std::optional<KnnIndex> epoch_index;
        std::optional<SoftLabelMatrix> epoch_soft;
        if (!fixed_geometry) {
            const FeatureMatrix jittered =
                perturb_features(base, config.jitter, derive_seed(config.seed, Stream::Jitter, {epoch}));
            epoch_index = build_index(jittered, index_k, knn_options);
            epoch_soft = knn_soft_labels(index_k == config.k ? *epoch_index : truncate_index(*epoch_index, config.k),
                                         dataset.noisy_labels, dataset.n_classes, config.include_self,
                                         config.weighting);
        }
        const KnnIndex& index = fixed_geometry ? *shared_index : *epoch_index;
        const SoftLabelMatrix& soft = fixed_geometry ? *shared_soft : *epoch_soft;

        if (!rank) {
            Rng ties = make_rng(config.seed, Stream::VoteTies, {epoch});
            report.per_epoch_flags.push_back(vote_detect(soft, dataset.noisy_labels, ties));
            continue;
        }

        const EpochModel model =
            fixed_geometry ? *shared_model
                           : estimate_model(index, dataset, config, derive_seed(config.seed, Stream::HocRestart, {epoch}));
        warn(model.warnings);
        RankResult result = rank_detect(soft, dataset.noisy_labels, model.posterior);
        report.per_epoch_flags.push_back(std::move(result.flags));
        if (score_sum.empty()) score_sum.assign(result.scores.size(), 0.0);
        for (std::size_t i = 0; i < score_sum.size(); ++i) score_sum[i] += result.scores[i];
        report.thresholds = std::move(result.thresholds);
        report.posterior = std::vector<double>(model.posterior.data(), model.posterior.data() + model.posterior.size());
        report.noise_model = model.model;
    }

    if (rank) {
        for (double& s : score_sum) s /= config.epochs;
        report.scores = std::move(score_sum);
    }
    report.flags = majority_over_epochs(report.per_epoch_flags);
    if (dataset.clean_labels) {
        report.evaluation = detection_metrics(report.flags, dataset.noisy_labels, *dataset.clean_labels);
    }
    return report;
}

} // namespace featclean
