#include "featclean/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace featclean {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool parse_double(const std::string& token, double& value) {
    if (token.empty()) return false;
    const char* begin = token.data();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), value);
    return ec == std::errc() && ptr == token.data() + token.size();
}

bool parse_label(const std::string& token, int& value) {
    if (token.empty()) return false;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    return ec == std::errc() && ptr == token.data() + token.size() && value >= 0;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

fs::path sidecar_path(const fs::path& path) {
    fs::path sidecar = path;
    sidecar.replace_extension(".json");
    return sidecar;
}

fs::path raw_path(const fs::path& path) {
    if (path.extension() == ".f32") return path;
    fs::path raw = path;
    raw.replace_extension(".f32");
    return raw;
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json config_to_json(const DetectorConfig& c) {
    json j = {
        {"method", to_string(c.method)},
        {"k", c.k},
        {"epochs", c.epochs},
        {"seed", c.seed},
        {"weighting", to_string(c.weighting)},
        {"include_self", c.include_self},
        {"jitter", c.jitter},
        {"noise_source", to_string(c.noise_source)},
        {"hoc_restarts", c.hoc_restarts},
        {"hoc_max_iterations", c.hoc_max_iterations},
    };
    if (c.user_noise_model) j["user_noise_model"] = noise_model_to_json(*c.user_noise_model);
    return j;
}

DetectorConfig config_from_json(const json& j) {
    DetectorConfig c;
    c.method = method_from_string(j.at("method").get<std::string>());
    c.k = j.at("k").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.weighting = weighting_from_string(j.at("weighting").get<std::string>());
    c.include_self = j.at("include_self").get<bool>();
    c.jitter = j.at("jitter").get<double>();
    c.noise_source = noise_source_from_string(j.at("noise_source").get<std::string>());
    c.hoc_restarts = j.at("hoc_restarts").get<int>();
    c.hoc_max_iterations = j.at("hoc_max_iterations").get<int>();
    if (j.contains("user_noise_model")) c.user_noise_model = noise_model_from_json(j.at("user_noise_model"));
    return c;
}

} // namespace

FeatureFormat feature_format_from_string(const std::string& s) {
    if (s == "auto") return FeatureFormat::Auto;
    if (s == "csv") return FeatureFormat::Csv;
    if (s == "raw" || s == "f32") return FeatureFormat::RawF32;
    throw ConfigError("unknown feature format '" + s + "' (expected auto|csv|raw)");
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

void validate_features(const FeatureMatrix& features) {
    if (features.rows() < 1 || features.cols() < 1) throw ValidationError("feature matrix is empty");
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        if (!features.row(r).allFinite()) {
            throw ValidationError("non-finite feature value in row " + std::to_string(r));
        }
    }
}

FeatureMatrix parse_features_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto fields = split_csv_line(lines[i]);
        std::vector<double> values(fields.size());
        bool numeric = true;
        for (std::size_t c = 0; c < fields.size() && numeric; ++c) numeric = parse_double(fields[c], values[c]);
        if (!numeric) {
            if (rows.empty() && i == 0) continue;  // header
            throw ParseError("non-numeric feature value on line " + std::to_string(i + 1));
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw FormatError("line " + std::to_string(i + 1) + " has " + std::to_string(values.size()) +
                              " columns, expected " + std::to_string(rows.front().size()));
        }
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (!std::isfinite(values[c])) {
                throw ValidationError("non-finite feature value in row " + std::to_string(rows.size()));
            }
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ValidationError("feature file holds no rows");

    FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    validate_features(out);
    return out;
}

FeatureMatrix load_features(const fs::path& path, FeatureFormat format) {
    if (format == FeatureFormat::Auto) {
        format = path.extension() == ".csv" ? FeatureFormat::Csv : FeatureFormat::RawF32;
    }
    if (format == FeatureFormat::Csv) return parse_features_csv(read_text_file(path));

    const fs::path data_path = raw_path(path);
    const fs::path meta_path = sidecar_path(path);
    if (!fs::exists(meta_path)) throw FormatError("missing sidecar " + meta_path.string());
    if (!fs::exists(data_path)) throw DataError("missing feature file " + data_path.string());

    json meta;
    try {
        meta = json::parse(read_text_file(meta_path));
    } catch (const json::exception& e) {
        throw FormatError("malformed sidecar " + meta_path.string() + ": " + e.what());
    }
    if (!meta.is_object() || !meta.contains("rows") || !meta.contains("cols")) {
        throw FormatError("sidecar " + meta_path.string() + " must declare rows and cols");
    }
    const std::string dtype = meta.value("dtype", std::string("f32"));
    if (dtype != "f32") throw FormatError("unsupported dtype '" + dtype + "' in " + meta_path.string());
    const auto rows = meta.at("rows").get<long long>();
    const auto cols = meta.at("cols").get<long long>();
    if (rows < 1 || cols < 1) throw FormatError("sidecar dimensions must be positive");

    const std::string bytes = read_text_file(data_path);
    const auto expected = static_cast<unsigned long long>(rows) * static_cast<unsigned long long>(cols);
    if (bytes.size() != expected * sizeof(float)) {
        throw FormatError(data_path.string() + " holds " + std::to_string(bytes.size() / sizeof(float)) +
                          " floats, sidecar declares " + std::to_string(rows) + "x" + std::to_string(cols));
    }

    FeatureMatrix out(rows, cols);
    for (unsigned long long i = 0; i < expected; ++i) {
        std::uint32_t word;
        std::memcpy(&word, bytes.data() + i * sizeof(float), sizeof(word));
        if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
        out.data()[i] = static_cast<double>(std::bit_cast<float>(word));
    }
    validate_features(out);
    return out;
}

void save_features_raw(const FeatureMatrix& features, const fs::path& path) {
    std::string bytes(static_cast<std::size_t>(features.size()) * sizeof(float), '\0');
    for (Eigen::Index i = 0; i < features.size(); ++i) {
        auto word = std::bit_cast<std::uint32_t>(static_cast<float>(features.data()[i]));
        if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
        std::memcpy(bytes.data() + i * sizeof(float), &word, sizeof(word));
    }
    write_text_file(raw_path(path), bytes);
    const json meta = {{"rows", features.rows()}, {"cols", features.cols()}, {"dtype", "f32"}};
    write_text_file(sidecar_path(path), meta.dump() + "\n");
}

LabelVector parse_labels(const std::string& text, const std::optional<std::string>& column) {
    const auto lines = lines_of(text);
    LabelVector labels;
    std::size_t first = 0;
    std::size_t field = 0;
    if (column) {
        if (lines.empty()) throw ValidationError("label file is empty");
        const auto header = split_csv_line(lines.front());
        const auto it = std::find(header.begin(), header.end(), *column);
        if (it == header.end()) throw FormatError("label column '" + *column + "' not found in header");
        field = static_cast<std::size_t>(it - header.begin());
        first = 1;
    }
    for (std::size_t i = first; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (line.empty()) continue;
        std::string token = line;
        if (column) {
            const auto fields = split_csv_line(line);
            if (field >= fields.size()) throw ParseError("missing label column on line " + std::to_string(i + 1));
            token = fields[field];
        }
        int value = 0;
        if (!parse_label(token, value)) {
            throw ParseError("invalid label '" + token + "' on line " + std::to_string(i + 1));
        }
        labels.push_back(value);
    }
    if (labels.empty()) throw ValidationError("label file holds no labels");
    return labels;
}

LabelVector load_labels(const fs::path& path, const std::optional<std::string>& column) {
    try {
        return parse_labels(read_text_file(path), column);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_labels(const LabelVector& labels, const fs::path& path) {
    std::string text;
    for (int y : labels) {
        text += std::to_string(y);
        text += '\n';
    }
    write_text_file(path, text);
}

int infer_n_classes(const LabelVector& labels) {
    if (labels.empty()) throw ValidationError("cannot infer classes from an empty label vector");
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

json noise_model_to_json(const NoiseModel& model) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < model.transition.rows(); ++r) {
        const Eigen::VectorXd row = model.transition.row(r).transpose();
        rows.push_back(vector_json(row));
    }
    return {{"prior", vector_json(model.prior)}, {"transition", rows}, {"noisy_marginal", vector_json(model.noisy_marginal)}};
}

NoiseModel noise_model_from_json(const json& j) {
    NoiseModel model;
    try {
        model.prior = vector_from_json(j.at("prior"));
        const auto& rows = j.at("transition");
        const auto k = static_cast<Eigen::Index>(rows.size());
        model.transition.resize(k, k);
        for (Eigen::Index r = 0; r < k; ++r) {
            const Eigen::VectorXd row = vector_from_json(rows.at(static_cast<std::size_t>(r)));
            if (row.size() != k) throw FormatError("transition matrix must be square");
            model.transition.row(r) = row.transpose();
        }
        if (j.contains("noisy_marginal")) {
            model.noisy_marginal = vector_from_json(j.at("noisy_marginal"));
        } else {
            model.noisy_marginal = model.transition.transpose() * model.prior;
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed noise model: ") + e.what());
    }
    const auto k = model.transition.rows();
    if (model.prior.size() != k || model.noisy_marginal.size() != k) {
        throw FormatError("noise model vectors do not match the transition matrix");
    }
    auto on_simplex = [](const Eigen::VectorXd& v) {
        return (v.array() >= -1e-9).all() && std::abs(v.sum() - 1.0) <= 1e-6;
    };
    if (!on_simplex(model.prior)) throw ValidationError("noise model prior is not a distribution");
    for (Eigen::Index r = 0; r < k; ++r) {
        if (!on_simplex(model.transition.row(r).transpose())) {
            throw ValidationError("transition row " + std::to_string(r) + " is not a distribution");
        }
    }
    return model;
}

NoiseModel load_noise_model(const fs::path& path) {
    try {
        return noise_model_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw FormatError("malformed noise model " + path.string() + ": " + e.what());
    }
}

json metrics_to_json(const DetectionMetrics& m) {
    return {
        {"precision", optional_json(m.precision)},
        {"recall", optional_json(m.recall)},
        {"f1", optional_json(m.f1)},
        {"tp", m.tp},
        {"fp", m.fp},
        {"fn", m.fn},
        {"corrupted_total", m.corrupted_total},
        {"flagged_total", m.flagged_total},
        {"clean_precision", optional_json(m.clean_precision)},
        {"clean_recall", optional_json(m.clean_recall)},
        {"clean_f1", optional_json(m.clean_f1)},
    };
}

DetectionMetrics metrics_from_json(const json& j) {
    DetectionMetrics m;
    m.precision = optional_from_json(j, "precision");
    m.recall = optional_from_json(j, "recall");
    m.f1 = optional_from_json(j, "f1");
    m.tp = j.at("tp").get<long>();
    m.fp = j.at("fp").get<long>();
    m.fn = j.at("fn").get<long>();
    m.corrupted_total = j.at("corrupted_total").get<long>();
    m.flagged_total = j.at("flagged_total").get<long>();
    m.clean_precision = optional_from_json(j, "clean_precision");
    m.clean_recall = optional_from_json(j, "clean_recall");
    m.clean_f1 = optional_from_json(j, "clean_f1");
    return m;
}

json report_to_json(const DetectionReport& r) {
    json j;
    j["format"] = "featclean-report";
    j["version"] = 1;
    j["n_instances"] = r.n_instances;
    j["n_classes"] = r.n_classes;
    j["flags"] = std::vector<bool>(r.flags.begin(), r.flags.end());
    j["flagged_count"] = r.flagged_count();
    j["per_epoch_flags"] = json::array();
    for (const auto& epoch : r.per_epoch_flags) j["per_epoch_flags"].push_back(epoch);
    if (r.scores) j["scores"] = *r.scores;
    if (r.thresholds) j["thresholds"] = *r.thresholds;
    if (r.posterior) j["posterior"] = *r.posterior;
    if (r.noise_model) j["noise_model"] = noise_model_to_json(*r.noise_model);
    j["config"] = config_to_json(r.config);
    j["inputs"] = r.inputs;
    if (r.evaluation) j["evaluation"] = metrics_to_json(*r.evaluation);
    j["warnings"] = r.warnings;
    return j;
}

DetectionReport report_from_json(const json& j) {
    DetectionReport r;
    try {
        if (j.value("format", std::string()) != "featclean-report") throw FormatError("not a detection report");
        r.n_instances = j.at("n_instances").get<Eigen::Index>();
        r.n_classes = j.at("n_classes").get<int>();
        const auto flags = j.at("flags").get<std::vector<bool>>();
        r.flags.assign(flags.begin(), flags.end());
        for (const auto& epoch : j.at("per_epoch_flags")) r.per_epoch_flags.push_back(epoch.get<std::vector<bool>>());
        if (j.contains("scores")) r.scores = j.at("scores").get<std::vector<double>>();
        if (j.contains("thresholds")) r.thresholds = j.at("thresholds").get<std::vector<long>>();
        if (j.contains("posterior")) r.posterior = j.at("posterior").get<std::vector<double>>();
        if (j.contains("noise_model")) r.noise_model = noise_model_from_json(j.at("noise_model"));
        r.config = config_from_json(j.at("config"));
        r.inputs = j.value("inputs", std::map<std::string, std::string>{});
        if (j.contains("evaluation")) r.evaluation = metrics_from_json(j.at("evaluation"));
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
    if (static_cast<Eigen::Index>(r.flags.size()) != r.n_instances) throw FormatError("report flag count mismatch");
    if (static_cast<int>(r.per_epoch_flags.size()) != r.config.epochs) {
        throw FormatError("report holds " + std::to_string(r.per_epoch_flags.size()) + " epochs, config says " +
                          std::to_string(r.config.epochs));
    }
    return r;
}

std::string report_to_string(const DetectionReport& report) { return report_to_json(report).dump(2) + "\n"; }

void write_report(const DetectionReport& report, const fs::path& path) {
    write_text_file(path, report_to_string(report));
}

DetectionReport read_report(const fs::path& path) {
    try {
        return report_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw FormatError("malformed report " + path.string() + ": " + e.what());
    }
}

} // namespace featclean
