#include "featclean/io.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace featclean;
using namespace featclean::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("featclean-io-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

void write_floats(const fs::path& path, int count) {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < count; ++i) {
        const float v = static_cast<float>(i) + 0.5f;
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

DetectionReport random_report(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DetectionReport r;
    r.n_instances = 1 + static_cast<Eigen::Index>(rng() % 40);
    r.n_classes = 2 + static_cast<int>(rng() % 4);
    r.config.method = rng() % 2 ? Method::Vote : Method::Rank;
    r.config.epochs = 1 + 2 * static_cast<int>(rng() % 3);
    r.config.k = 1 + static_cast<int>(rng() % 20);
    r.config.seed = rng();
    r.config.jitter = rng() % 2 ? 0.0 : unit(rng);
    r.config.weighting = rng() % 2 ? Weighting::Uniform : Weighting::Similarity;
    for (int e = 0; e < r.config.epochs; ++e) {
        FlagVector f(static_cast<std::size_t>(r.n_instances));
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng() % 2;
        r.per_epoch_flags.push_back(f);
    }
    r.flags = majority_over_epochs(r.per_epoch_flags);
    if (r.config.method == Method::Rank) {
        r.scores.emplace();
        for (Eigen::Index i = 0; i < r.n_instances; ++i) r.scores->push_back(unit(rng));
        r.thresholds.emplace(static_cast<std::size_t>(r.n_classes), static_cast<long>(rng() % 5));
        r.posterior.emplace(static_cast<std::size_t>(r.n_classes), unit(rng));
        NoiseModel m;
        m.prior = random_simplex(r.n_classes, rng);
        m.transition.resize(r.n_classes, r.n_classes);
        for (int c = 0; c < r.n_classes; ++c) m.transition.row(c) = random_simplex(r.n_classes, rng).transpose();
        m.noisy_marginal = random_simplex(r.n_classes, rng);
        r.noise_model = m;
    }
    if (rng() % 2) {
        DetectionMetrics m;
        m.tp = static_cast<long>(rng() % 10);
        m.fp = static_cast<long>(rng() % 10);
        m.precision = unit(rng);
        m.f1 = unit(rng);
        r.evaluation = m;
    }
    r.inputs["features"] = "f.f32";
    if (rng() % 3 == 0) r.warnings.push_back("posterior clipped for class 1");
    return r;
}

} // namespace

TEST_CASE("CSV features") {
    const FeatureMatrix x = parse_features_csv("1,2\n3,4\n");
    CHECK(x.rows() == 2);
    CHECK(x(1, 0) == 3.0);
    SUBCASE("header is skipped") { CHECK(parse_features_csv("a,b\n1,2\n").rows() == 1); }
    SUBCASE("ragged rows") { CHECK_THROWS_AS(parse_features_csv("1,2\n3\n"), FormatError); }
    SUBCASE("non-numeric body") { CHECK_THROWS_AS(parse_features_csv("1,2\nx,4\n"), ParseError); }
    SUBCASE("non-finite") { CHECK_THROWS_AS(parse_features_csv("1,2\nnan,4\n"), ValidationError); }
}

TEST_CASE("raw float32 features") {
    TempDir dir;
    SUBCASE("sidecar shape") {
        write_floats(dir / "f.f32", 12);
        write_text_file(dir / "f.json", R"({"rows": 3, "cols": 4, "dtype": "f32"})");
        const FeatureMatrix x = load_features(dir / "f.f32");
        CHECK(x.rows() == 3);
        CHECK(x.cols() == 4);
        CHECK(x(1, 0) == 4.5);
        CHECK(x(2, 3) == 11.5);
    }
    SUBCASE("size mismatch") {
        write_floats(dir / "f.f32", 11);
        write_text_file(dir / "f.json", R"({"rows": 3, "cols": 4, "dtype": "f32"})");
        CHECK_THROWS_AS(load_features(dir / "f.f32"), FormatError);
    }
    SUBCASE("missing sidecar names the path") {
        write_floats(dir / "g.f32", 4);
        try {
            load_features(dir / "g.f32");
            FAIL("expected a FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find((dir / "g.json").string()) != std::string::npos);
        }
    }
    SUBCASE("save and load") {
        FeatureMatrix x = gaussian_rows(7, 5, 1);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(x.data()[i]);
        save_features_raw(x, dir / "h.f32");
        const FeatureMatrix back = load_features(dir / "h.f32");
        CHECK(back == x);
    }
}

TEST_CASE("labels") {
    const LabelVector y = parse_labels("0\n2\n1\n");
    CHECK(y == LabelVector{0, 2, 1});
    CHECK(infer_n_classes(y) == 3);
    SUBCASE("negative label reports its line") {
        try {
            parse_labels("0\n-1\n");
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("non-integer") { CHECK_THROWS_AS(parse_labels("0\n1.5\n"), ParseError); }
    SUBCASE("empty input") { CHECK_THROWS_AS(parse_labels(""), ValidationError); }
    SUBCASE("named CSV column") {
        CHECK(parse_labels("id,label\n7,1\n8,0\n", std::string("label")) == LabelVector{1, 0});
        CHECK_THROWS_AS(parse_labels("id,label\n7,1\n", std::string("y")), FormatError);
    }
    SUBCASE("file round trip") {
        TempDir dir;
        save_labels({3, 0, 1}, dir / "l.txt");
        CHECK(load_labels(dir / "l.txt") == LabelVector{3, 0, 1});
    }
}

TEST_CASE("noise model JSON") {
    const NoiseModel m{Eigen::Vector2d(0.5, 0.5), (RowMatrixXd(2, 2) << 0.8, 0.2, 0.3, 0.7).finished(),
                       Eigen::Vector2d(0.55, 0.45)};
    CHECK(noise_model_from_json(noise_model_to_json(m)) == m);
    nlohmann::json bad = noise_model_to_json(m);
    bad["transition"][0][0] = 0.5;
    CHECK_THROWS_AS(noise_model_from_json(bad), ValidationError);
}

TEST_CASE("report JSON round trip") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const DetectionReport r = random_report(rng);
        const std::string text = report_to_string(r);
        const DetectionReport back = report_from_json(nlohmann::json::parse(text));
        CHECK(back == r);
        CHECK(report_to_string(back) == text);
    }
}

TEST_CASE("report layout") {
    DetectionReport r;
    r.n_instances = 3;
    r.n_classes = 2;
    r.config.epochs = 1;
    r.per_epoch_flags = {{true, false, true}};
    r.flags = {true, false, true};
    const nlohmann::json j = nlohmann::json::parse(report_to_string(r));
    CHECK(j["flags"] == nlohmann::json::array({true, false, true}));
    CHECK(j["flagged_count"] == 2);
    CHECK_FALSE(j.contains("evaluation"));
    CHECK_FALSE(j["config"].contains("threads"));

    SUBCASE("metrics keep nulls") {
        r.evaluation = DetectionMetrics{};
        const nlohmann::json k = nlohmann::json::parse(report_to_string(r));
        CHECK(k["evaluation"]["f1"].is_null());
    }
    SUBCASE("malformed input") {
        CHECK_THROWS_AS(report_from_json(nlohmann::json::parse(R"({"format": "other"})")), FormatError);
        nlohmann::json broken = j;
        broken["flags"] = nlohmann::json::array({true});
        CHECK_THROWS_AS(report_from_json(broken), FormatError);
    }
}
