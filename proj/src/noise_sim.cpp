#include "featclean/noise_sim.hpp"

#include "featclean/random.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace featclean {

namespace {

void check_inputs(const LabelVector& labels, int n_classes, double eta) {
    if (n_classes < 2) throw ConfigError("label noise needs at least two classes");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("clean label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                                  " is outside [0, " + std::to_string(n_classes) + ")");
        }
    }
}

} // namespace

const char* to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::Symmetric: return "symmetric";
    case NoiseKind::Asymmetric: return "asymmetric";
    case NoiseKind::Instance: return "instance";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "symmetric") return NoiseKind::Symmetric;
    if (s == "asymmetric") return NoiseKind::Asymmetric;
    if (s == "instance") return NoiseKind::Instance;
    throw ConfigError("unknown noise kind '" + s + "' (expected symmetric|asymmetric|instance)");
}

LabelVector inject_symmetric(const LabelVector& labels, int n_classes, double eta, std::uint64_t seed) {
    check_inputs(labels, n_classes, eta);
    if (eta == 0.0) return labels;
    Rng rng = make_rng(seed, Stream::NoiseSymmetric);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> other(0, n_classes - 2);
    LabelVector out = labels;
    for (int& y : out) {
        if (unit(rng) < eta) {
            const int r = other(rng);
            y = r >= y ? r + 1 : r;
        }
    }
    return out;
}

LabelVector inject_asymmetric(const LabelVector& labels, int n_classes, double eta, std::uint64_t seed) {
    check_inputs(labels, n_classes, eta);
    if (eta == 0.0) return labels;
    Rng rng = make_rng(seed, Stream::NoiseAsymmetric);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    LabelVector out = labels;
    for (int& y : out) {
        if (unit(rng) < eta) y = (y + 1) % n_classes;
    }
    return out;
}

LabelVector inject_instance_dependent(const FeatureMatrix& features, const LabelVector& labels, int n_classes,
                                      double eta, std::uint64_t seed, const InstanceNoiseOptions& options) {
    check_inputs(labels, n_classes, eta);
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw ValidationError("features and labels must be row-aligned");
    }
    if (!(options.rate_std >= 0.0)) throw ConfigError("rate_std must be non-negative");
    if (eta == 0.0) return labels;

    const Eigen::Index d = features.cols();
    std::vector<Eigen::MatrixXd> projections;
    projections.reserve(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        Rng rng = make_rng(seed, Stream::NoiseInstance, {0, static_cast<std::uint64_t>(c)});
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd w(d, n_classes);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (int j = 0; j < n_classes; ++j) w(i, j) = normal(rng);
        }
        projections.push_back(std::move(w));
    }

    Rng rng = make_rng(seed, Stream::NoiseInstance, {1});
    std::normal_distribution<double> rate(eta, options.rate_std);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    LabelVector out = labels;
    Eigen::VectorXd weights(n_classes);
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const int y = labels[n];
        double q = eta;
        if (options.rate_std > 0.0) {
            // truncated normal on [0, 1] by rejection
            do {
                q = rate(rng);
            } while (q < 0.0 || q > 1.0);
        }

        const Eigen::VectorXd s =
            projections[static_cast<std::size_t>(y)].transpose() * features.row(static_cast<Eigen::Index>(n)).transpose();
        double peak = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_classes; ++j) {
            if (j != y) peak = std::max(peak, s(j));
        }
        double total = 0.0;
        for (int j = 0; j < n_classes; ++j) {
            weights(j) = j == y ? 0.0 : std::exp(s(j) - peak);
            total += weights(j);
        }

        double u = unit(rng);
        if (u >= q) continue;  // stays clean with probability 1 - q
        u = u / q * total;
        int pick = -1;
        for (int j = 0; j < n_classes; ++j) {
            if (j == y) continue;
            pick = j;
            if (u < weights(j)) break;
            u -= weights(j);
        }
        out[n] = pick;
    }
    return out;
}

double corruption_fraction(const LabelVector& clean, const LabelVector& noisy) {
    if (clean.size() != noisy.size()) throw ValidationError("label vectors differ in length");
    if (clean.empty()) return 0.0;
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) flipped += clean[i] != noisy[i];
    return static_cast<double>(flipped) / clean.size();
}

} // namespace featclean
