#pragma once

#include "featclean/common.hpp"
#include "featclean/detectors.hpp"
#include "featclean/hoc.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace featclean {

enum class FeatureFormat { Auto, Csv, RawF32 };

FeatureFormat feature_format_from_string(const std::string& s);

/// Loads features from CSV (optional header) or little-endian float32 with a
/// `<stem>.json` sidecar `{"rows": N, "cols": d, "dtype": "f32"}`. Auto picks
/// CSV for a `.csv` extension and raw otherwise.
FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format = FeatureFormat::Auto);

FeatureMatrix parse_features_csv(const std::string& text);

/// Writes `<stem>.f32` and the sidecar.
void save_features_raw(const FeatureMatrix& features, const std::filesystem::path& path);

/// Rejects NaN/Inf and empty matrices, naming the offending row.
void validate_features(const FeatureMatrix& features);

/// One non-negative integer per line. With `column`, the file is read as CSV
/// with a header and the named column is used.
LabelVector load_labels(const std::filesystem::path& path, const std::optional<std::string>& column = {});

LabelVector parse_labels(const std::string& text, const std::optional<std::string>& column = {});

void save_labels(const LabelVector& labels, const std::filesystem::path& path);

/// max + 1
int infer_n_classes(const LabelVector& labels);

nlohmann::json noise_model_to_json(const NoiseModel& model);
NoiseModel noise_model_from_json(const nlohmann::json& j);
NoiseModel load_noise_model(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const DetectionMetrics& metrics);
DetectionMetrics metrics_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);

/// Serialized report text (sorted keys, two-space indent, trailing newline).
std::string report_to_string(const DetectionReport& report);

void write_report(const DetectionReport& report, const std::filesystem::path& path);
DetectionReport read_report(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace featclean
