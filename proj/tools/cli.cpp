#include "featclean/cli.hpp"

#include "featclean/bounds.hpp"
#include "featclean/detectors.hpp"
#include "featclean/eval.hpp"
#include "featclean/io.hpp"
#include "featclean/noise_sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

namespace featclean {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DetectArgs {
    std::string features, format = "auto", labels, clean, label_column;
    std::string method = "vote", weighting = "uniform", noise_source = "hoc", noise_model, out;
    int k = 10, epochs = 21, n_classes = 0, hoc_restarts = 10;
    std::uint64_t seed = 0;
    double jitter = 0.0;
    bool no_self = false;
    unsigned threads = 0;
};

struct InjectArgs {
    std::string labels, kind = "symmetric", features, format = "auto", out, manifest;
    double eta = 0.0, rate_std = 0.1;
    std::uint64_t seed = 0;
    int n_classes = 0;
};

struct EvalArgs {
    std::string report, clean, labels, out;
};

struct ProfileArgs {
    std::string features, format = "auto", clean, out;
    int k_max = 20;
    std::optional<double> e;
    unsigned threads = 0;
};

struct BoundArgs {
    bool vote = false, breakeven = false, rank_f1 = false;
    int k = 10, k1 = 5, k2 = 20;
    double e = 0.0, delta = 0.0;
    long n_minus = 0, n_plus = 0, alpha = 0;
    double mu_gap = 0.0, spread = 0.0, v = 1.0;
    std::uint64_t samples = 1000000, seed = 0;
    unsigned threads = 0;
    std::string out;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") out << text;
    else write_text_file(path, text);
}

int class_count(int requested, std::initializer_list<const LabelVector*> label_sets) {
    int inferred = 0;
    for (const auto* labels : label_sets) {
        if (labels && !labels->empty()) inferred = std::max(inferred, infer_n_classes(*labels));
    }
    if (requested == 0) return inferred;
    if (requested < inferred) {
        throw ValidationError("labels reach class " + std::to_string(inferred - 1) + " but --n-classes is " +
                              std::to_string(requested));
    }
    return requested;
}

int run_detect(const DetectArgs& a, std::ostream& out) {
    DetectorConfig config;
    config.method = method_from_string(a.method);
    config.k = a.k;
    config.epochs = a.epochs;
    config.seed = a.seed;
    config.weighting = weighting_from_string(a.weighting);
    config.include_self = !a.no_self;
    config.jitter = a.jitter;
    config.noise_source = noise_source_from_string(a.noise_source);
    config.hoc_restarts = a.hoc_restarts;
    config.threads = a.threads;
    if (config.noise_source == NoiseSource::User) {
        if (a.noise_model.empty()) throw ConfigError("--noise-source user needs --noise-model");
        config.user_noise_model = load_noise_model(a.noise_model);
    }
    config.validate();

    const std::optional<std::string> column = a.label_column.empty() ? std::nullopt : std::optional(a.label_column);
    LabeledDataset data;
    data.features = load_features(a.features, feature_format_from_string(a.format));
    data.noisy_labels = load_labels(a.labels, column);
    if (!a.clean.empty()) data.clean_labels = load_labels(a.clean, column);
    data.n_classes = class_count(a.n_classes, {&data.noisy_labels, data.clean_labels ? &*data.clean_labels : nullptr});
    if (config.user_noise_model) data.n_classes = std::max(data.n_classes, config.user_noise_model->n_classes());

    DetectionReport report = run_pipeline(data, config);
    report.inputs["features"] = a.features;
    report.inputs["labels"] = a.labels;
    if (!a.clean.empty()) report.inputs["clean"] = a.clean;
    if (!a.noise_model.empty()) report.inputs["noise_model"] = a.noise_model;
    write_report(report, a.out);

    std::ostringstream line;
    line << "N=" << report.n_instances << " K=" << report.n_classes << " flagged=" << report.flagged_count();
    if (report.thresholds) {
        line << " per_class=";
        for (std::size_t j = 0; j < report.thresholds->size(); ++j) line << (j ? "," : "") << (*report.thresholds)[j];
    }
    if (report.evaluation && report.evaluation->f1) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *report.evaluation->f1);
        line << " f1=" << buf;
    }
    out << line.str() << "\n";
    return 0;
}

int run_inject(const InjectArgs& a, std::ostream& out) {
    const NoiseKind kind = noise_kind_from_string(a.kind);
    if (!(a.eta >= 0.0 && a.eta < 1.0)) throw ConfigError("--eta must lie in [0, 1)");
    const LabelVector clean = load_labels(a.labels);
    const int k = class_count(a.n_classes, {&clean});

    LabelVector noisy;
    switch (kind) {
    case NoiseKind::Symmetric: noisy = inject_symmetric(clean, k, a.eta, a.seed); break;
    case NoiseKind::Asymmetric: noisy = inject_asymmetric(clean, k, a.eta, a.seed); break;
    case NoiseKind::Instance: {
        if (a.features.empty()) throw ConfigError("--kind instance needs --features");
        InstanceNoiseOptions options;
        options.rate_std = a.rate_std;
        noisy = inject_instance_dependent(load_features(a.features, feature_format_from_string(a.format)), clean, k,
                                          a.eta, a.seed, options);
        break;
    }
    }
    save_labels(noisy, a.out);

    const double realized = corruption_fraction(clean, noisy);
    json manifest = {
        {"kind", to_string(kind)},
        {"eta", a.eta},
        {"seed", a.seed},
        {"n_instances", clean.size()},
        {"n_classes", k},
        {"realized_rate", realized},
        {"clean_labels", a.labels},
        {"noisy_labels", a.out},
    };
    if (kind == NoiseKind::Instance) {
        manifest["features"] = a.features;
        manifest["rate_std"] = a.rate_std;
    }
    std::vector<std::string> warnings;
    if (kind == NoiseKind::Asymmetric && a.eta >= 0.5) {
        warnings.push_back("asymmetric noise at eta >= 0.5 makes the successor class the majority");
    }
    manifest["warnings"] = warnings;
    const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
    write_text_file(manifest_path, manifest.dump(2) + "\n");

    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", realized);
    out << "N=" << clean.size() << " K=" << k << " kind=" << to_string(kind) << " realized_rate=" << buf << "\n";
    return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
    const DetectionReport report = read_report(a.report);
    std::string labels_path = a.labels;
    if (labels_path.empty()) {
        const auto it = report.inputs.find("labels");
        if (it == report.inputs.end()) throw ConfigError("report names no noisy labels; pass --labels");
        labels_path = it->second;
    }
    const LabelVector noisy = load_labels(labels_path);
    const LabelVector clean = load_labels(a.clean);
    if (static_cast<Eigen::Index>(noisy.size()) != report.n_instances) {
        throw ValidationError("noisy labels hold " + std::to_string(noisy.size()) + " entries, report has " +
                              std::to_string(report.n_instances));
    }
    const DetectionMetrics m = detection_metrics(report.flags, noisy, clean);
    emit(metrics_to_json(m).dump(2) + "\n", a.out, out);
    return 0;
}

int run_profile(const ProfileArgs& a, std::ostream& out) {
    if (a.k_max < 1) throw ConfigError("--k-max must be positive");
    if (a.e && !(*a.e >= 0.0 && *a.e <= 1.0)) throw ConfigError("--e must lie in [0, 1]");
    const FeatureMatrix x = load_features(a.features, feature_format_from_string(a.format));
    const LabelVector clean = load_labels(a.clean);
    if (static_cast<Eigen::Index>(clean.size()) != x.rows()) throw ValidationError("features and labels differ in length");
    if (a.k_max >= x.rows()) throw ConfigError("--k-max must be below the number of instances");
    const std::vector<double> profile = delta_k_profile(x, clean, a.k_max, a.threads);

    std::ostringstream table;
    table << (a.e ? "k\tdelta_k\tvote_bound\n" : "k\tdelta_k\n");
    char buf[64];
    for (int k = 1; k <= a.k_max; ++k) {
        const double d = profile[static_cast<std::size_t>(k - 1)];
        std::snprintf(buf, sizeof buf, "%d\t%.6f", k, d);
        table << buf;
        if (a.e) {
            std::snprintf(buf, sizeof buf, "\t%.6f", vote_lower_bound({k, *a.e, d}));
            table << buf;
        }
        table << "\n";
    }
    emit(table.str(), a.out, out);
    return 0;
}

int run_bound(const BoundArgs& a, std::ostream& out) {
    json j;
    if (a.vote) {
        const VoteBoundInput in{a.k, a.e, a.delta};
        j = {{"kind", "vote"},
             {"k", a.k},
             {"k_prime", vote_k_prime(a.k)},
             {"e", a.e},
             {"delta_k", a.delta},
             {"majority_probability", vote_majority_probability(a.k, a.e)},
             {"bound", vote_lower_bound(in)}};
    } else if (a.breakeven) {
        j = {{"kind", "breakeven"},
             {"k1", a.k1},
             {"k2", a.k2},
             {"e", a.e},
             {"delta_k1", a.delta},
             {"ratio", majority_probability_ratio(a.k1, a.k2, a.e)},
             {"delta_k2_breakeven", k_breakeven(a.k1, a.k2, a.e, a.delta)}};
    } else {
        const RankBoundInput in{a.n_minus, a.n_plus, a.alpha, a.mu_gap, a.spread, a.v};
        const RankBound b = rank_f1_bound(in, a.samples, a.seed, a.threads);
        j = {{"kind", "rank"},
             {"n_minus", a.n_minus},
             {"n_plus", a.n_plus},
             {"alpha", a.alpha},
             {"mu_gap", a.mu_gap},
             {"spread", a.spread},
             {"v", a.v},
             {"f1_lower", b.f1_lower},
             {"prob_p", b.prob_p},
             {"ci_half_width", b.ci_half_width},
             {"ci_low", b.ci_low},
             {"ci_high", b.ci_high},
             {"samples", b.samples},
             {"seed", a.seed}};
    }
    emit(j.dump(2) + "\n", a.out, out);
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Training-free corrupted-label detection from feature neighborhoods", "featclean"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    DetectArgs d;
    CLI::App* detect = app.add_subcommand("detect", "Flag instances whose labels look corrupted");
    detect->add_option("--features", d.features, "Feature file (.csv or .f32 with .json sidecar)")->required();
    detect->add_option("--format", d.format, "Feature format")->check(CLI::IsMember({"auto", "csv", "raw"}))
        ->capture_default_str();
    detect->add_option("--labels", d.labels, "Noisy labels, one integer per line")->required();
    detect->add_option("--clean", d.clean, "Clean labels; adds an evaluation block to the report");
    detect->add_option("--label-column", d.label_column, "Read labels from this column of a CSV with a header");
    detect->add_option("--method", d.method, "Detector")->check(CLI::IsMember({"vote", "rank"}))->capture_default_str();
    detect->add_option("--k", d.k, "Neighbors per instance")->capture_default_str();
    detect->add_option("--epochs", d.epochs, "Epochs M (odd) for the majority vote")->capture_default_str();
    detect->add_option("--seed", d.seed, "Seed for every random stream")->capture_default_str();
    detect->add_option("--jitter", d.jitter, "Gaussian feature jitter sigma per epoch")->capture_default_str();
    detect->add_option("--weighting", d.weighting, "Soft-label weighting")
        ->check(CLI::IsMember({"uniform", "similarity"}))->capture_default_str();
    detect->add_flag("--no-self", d.no_self, "Exclude the instance's own label from its soft label");
    detect->add_option("--noise-source", d.noise_source, "Where rank mode gets its noise model")
        ->check(CLI::IsMember({"hoc", "user"}))->capture_default_str();
    detect->add_option("--noise-model", d.noise_model, "Noise model JSON for --noise-source user");
    detect->add_option("--hoc-restarts", d.hoc_restarts, "Restarts of the noise model fit")->capture_default_str();
    detect->add_option("--n-classes", d.n_classes, "Number of classes (default: inferred from labels)");
    detect->add_option("--threads", d.threads, "Worker threads (0 = hardware); never changes results");
    detect->add_option("--out", d.out, "Report path")->required();

    InjectArgs in;
    CLI::App* inject = app.add_subcommand("inject", "Add synthetic label noise to clean labels");
    inject->add_option("--labels", in.labels, "Clean labels")->required();
    inject->add_option("--kind", in.kind, "Noise kind")->check(CLI::IsMember({"symmetric", "asymmetric", "instance"}))
        ->capture_default_str();
    inject->add_option("--eta", in.eta, "Corruption rate in [0, 1)")->required();
    inject->add_option("--seed", in.seed, "Seed")->capture_default_str();
    inject->add_option("--features", in.features, "Features (instance-dependent noise only)");
    inject->add_option("--format", in.format, "Feature format")->check(CLI::IsMember({"auto", "csv", "raw"}))
        ->capture_default_str();
    inject->add_option("--rate-std", in.rate_std, "Std of the per-instance flip rate (instance noise)")
        ->capture_default_str();
    inject->add_option("--n-classes", in.n_classes, "Number of classes (default: inferred)");
    inject->add_option("--out", in.out, "Noisy label path")->required();
    inject->add_option("--manifest", in.manifest, "Manifest path (default: <out>.manifest.json)");

    EvalArgs ev;
    CLI::App* eval = app.add_subcommand("eval", "Score a detection report against clean labels");
    eval->add_option("--report", ev.report, "Detection report")->required();
    eval->add_option("--clean", ev.clean, "Clean labels")->required();
    eval->add_option("--labels", ev.labels, "Noisy labels (default: the path recorded in the report)");
    eval->add_option("--out", ev.out, "Metrics path (default: stdout)");

    ProfileArgs pr;
    CLI::App* profile = app.add_subcommand("profile-k", "Tabulate the clusterability violation rate over k");
    profile->add_option("--features", pr.features, "Feature file")->required();
    profile->add_option("--format", pr.format, "Feature format")->check(CLI::IsMember({"auto", "csv", "raw"}))
        ->capture_default_str();
    profile->add_option("--clean", pr.clean, "Clean labels")->required();
    profile->add_option("--k-max", pr.k_max, "Largest k")->capture_default_str();
    profile->add_option("--e", pr.e, "Noise-rate bound; adds a vote_bound column");
    profile->add_option("--threads", pr.threads, "Worker threads");
    profile->add_option("--out", pr.out, "TSV path (default: stdout)");

    BoundArgs b;
    CLI::App* bound = app.add_subcommand("bound", "Evaluate the theoretical detection bounds");
    auto* mode = bound->add_option_group("mode", "Which bound");
    mode->add_flag("--vote", b.vote, "Vote correctness lower bound (--k --e --delta)");
    mode->add_flag("--breakeven", b.breakeven, "delta_k2 at which k2 stops beating k1 (--k1 --k2 --e --delta)");
    mode->add_flag("--rank-f1", b.rank_f1,
                   "Rank F1 lower bound and its probability (--n-minus --n-plus --alpha --mu-gap --spread --v)");
    mode->require_option(1);
    bound->add_option("--k", b.k, "Neighbors")->capture_default_str();
    bound->add_option("--k1", b.k1, "Smaller k")->capture_default_str();
    bound->add_option("--k2", b.k2, "Larger k")->capture_default_str();
    bound->add_option("--e", b.e, "Noise-rate upper bound")->capture_default_str();
    bound->add_option("--delta", b.delta, "Clusterability violation rate (delta_k or delta_k1)")->capture_default_str();
    bound->add_option("--n-minus", b.n_minus, "Corrupted instances in the class");
    bound->add_option("--n-plus", b.n_plus, "Clean instances in the class");
    bound->add_option("--alpha", b.alpha, "Clean instances allowed below the cut");
    bound->add_option("--mu-gap", b.mu_gap, "Mean score gap between clean and corrupted instances");
    bound->add_option("--spread", b.spread, "Tail width Delta");
    bound->add_option("--v", b.v, "Tail decay rate")->capture_default_str();
    bound->add_option("--samples", b.samples, "Monte-Carlo samples")->capture_default_str();
    bound->add_option("--seed", b.seed, "Monte-Carlo seed")->capture_default_str();
    bound->add_option("--threads", b.threads, "Worker threads");
    bound->add_option("--out", b.out, "JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*detect) return run_detect(d, out);
        if (*inject) return run_inject(in, out);
        if (*eval) return run_eval(ev, out);
        if (*profile) return run_profile(pr, out);
        return run_bound(b, out);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"featclean"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace featclean
