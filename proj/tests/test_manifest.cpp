#include "uqfair/errors.hpp"
#include "uqfair/manifest.hpp"
#include "uqfair/tensor.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

using namespace uqfair;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / "uqfair_manifest_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// classification prediction dump: T=2, given class probabilities per sample
void write_cls_pred(const fs::path& p, const std::vector<double>& rows, size_t C) {
    write_tensor(Tensor::from_f64({rows.size() / C, C}, rows), p);
}

json base_manifest(int n, const std::vector<int>& groups) {
    json j;
    j["task"] = "classification";
    j["class_count"] = 2;
    j["class_names"] = {"a", "b"};
    j["measure"] = "entropy";
    j["normalization"] = "bound";
    j["instances"] = json::array();
    for (int i = 0; i < n; ++i)
        j["instances"].push_back({{"id", "i" + std::to_string(i)},
                                  {"group", groups[static_cast<size_t>(i)]},
                                  {"truth", i % 2},
                                  {"prediction_path", "p" + std::to_string(i) + ".uqt"}});
    return j;
}

void dump(const json& j, const fs::path& p) {
    std::ofstream out(p);
    out << j.dump(2);
}

} // namespace

TEST_CASE("valid manifest loads with correct group counts") {
    const auto dir = fresh_dir("ok");
    for (int i = 0; i < 4; ++i)
        write_cls_pred(dir / ("p" + std::to_string(i) + ".uqt"), {0.9, 0.1, 0.8, 0.2}, 2);
    dump(base_manifest(4, {0, 0, 1, 1}), dir / "manifest.json");

    const EvalManifest m = load_manifest(dir / "manifest.json", true);
    CHECK(m.instances.size() == 4);
    CHECK(m.count_group(0) == 2);
    CHECK(m.count_group(1) == 2);
    CHECK(m.count_group(0) + m.count_group(1) == m.instances.size());
}

TEST_CASE("single-group manifest raises MissingGroup") {
    const auto dir = fresh_dir("onegroup");
    dump(base_manifest(3, {0, 0, 0}), dir / "manifest.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.json"), doctest::Contains("MissingGroup"),
                         ValidationError);
}

TEST_CASE("class index boundary is rejected") {
    const auto dir = fresh_dir("boundary");
    json j = base_manifest(2, {0, 1});
    j["class_count"] = 8;
    j["class_names"] = json::array();
    j["instances"][1]["truth"] = 8;
    dump(j, dir / "manifest.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.json"),
                         doctest::Contains("out of range"), ValidationError);
}

TEST_CASE("duplicate ids are rejected") {
    const auto dir = fresh_dir("dups");
    json j = base_manifest(2, {0, 1});
    j["instances"][1]["id"] = "i0";
    dump(j, dir / "manifest.json");
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.json"), doctest::Contains("duplicate"),
                         ValidationError);
}

TEST_CASE("probability closure violations fail at load, never silently") {
    const auto dir = fresh_dir("closure");
    write_cls_pred(dir / "p0.uqt", {0.9, 0.1, 0.8, 0.2}, 2);
    write_cls_pred(dir / "p1.uqt", {0.5, 0.4, 0.5, 0.5}, 2); // first row sums to 0.9
    dump(base_manifest(2, {0, 1}), dir / "manifest.json");
    const EvalManifest m = load_manifest(dir / "manifest.json", true);
    CHECK_NOTHROW(load_predictions(m, m.instances[0]));
    CHECK_THROWS_AS(load_predictions(m, m.instances[1]), ValidationError);
}

TEST_CASE("closure tolerates f32 softmax rounding within 1e-4") {
    const auto dir = fresh_dir("tol");
    write_cls_pred(dir / "p0.uqt", {0.90003, 0.1, 0.8, 0.2}, 2);
    write_cls_pred(dir / "p1.uqt", {0.5, 0.5, 0.5, 0.5}, 2);
    dump(base_manifest(2, {0, 1}), dir / "manifest.json");
    const EvalManifest m = load_manifest(dir / "manifest.json", true);
    CHECK_NOTHROW(load_predictions(m, m.instances[0]));
}

TEST_CASE("regression dump with negative predicted variance is rejected") {
    const auto dir = fresh_dir("negvar");
    json j;
    j["task"] = "regression";
    j["target_names"] = {"t0"};
    j["measure"] = "total-var";
    j["normalization"] = "minmax";
    j["instances"] = {{{"id", "a"}, {"group", 0}, {"truth", {1.0}}, {"prediction_path", "a.uqt"}},
                      {{"id", "b"}, {"group", 1}, {"truth", {2.0}}, {"prediction_path", "b.uqt"}}};
    dump(j, dir / "manifest.json");
    write_tensor(Tensor::from_f64({2, 1, 2}, {1.0, 0.5, 1.1, 0.5}), dir / "a.uqt");
    write_tensor(Tensor::from_f64({2, 1, 2}, {2.0, -0.5, 2.1, 0.5}), dir / "b.uqt");
    const EvalManifest m = load_manifest(dir / "manifest.json", true);
    CHECK_NOTHROW(load_predictions(m, m.instances[0]));
    CHECK_THROWS_WITH_AS(load_predictions(m, m.instances[1]),
                         doctest::Contains("NegativeVariance"), ValidationError);
}

TEST_CASE("missing prediction file is caught eagerly when required") {
    const auto dir = fresh_dir("missing");
    write_cls_pred(dir / "p0.uqt", {0.9, 0.1, 0.8, 0.2}, 2);
    dump(base_manifest(2, {0, 1}), dir / "manifest.json"); // p1.uqt never written
    CHECK_NOTHROW(load_manifest(dir / "manifest.json", false));
    CHECK_THROWS_WITH_AS(load_manifest(dir / "manifest.json", true),
                         doctest::Contains("prediction file missing"), ValidationError);
}

TEST_CASE("manifest save/load round-trip") {
    const auto dir = fresh_dir("roundtrip");
    for (int i = 0; i < 2; ++i)
        write_cls_pred(dir / ("p" + std::to_string(i) + ".uqt"), {0.9, 0.1, 0.8, 0.2}, 2);
    dump(base_manifest(2, {0, 1}), dir / "manifest.json");
    const EvalManifest m = load_manifest(dir / "manifest.json");
    save_manifest(m, dir / "copy.json");
    const EvalManifest m2 = load_manifest(dir / "copy.json");
    CHECK(m2.instances.size() == m.instances.size());
    CHECK(m2.instances[1].id == m.instances[1].id);
    CHECK(to_string(m2.measure) == to_string(m.measure));
}
