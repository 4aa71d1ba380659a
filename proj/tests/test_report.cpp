#include "uqfair/errors.hpp"
#include "uqfair/report.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace uqfair;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / "uqfair_report_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

FairnessCurve sample_curve() {
    FairnessCurve c;
    c.metric = "accuracy";
    c.scope = "overall";
    c.taus = {100, 50, 0};
    c.em_d0 = {0.9, 0.95, std::nullopt};
    c.em_d1 = {0.8, 0.9, 0.99};
    c.em_all = {0.85, 0.925, 0.99};
    c.fg = {0.1, 0.05, std::nullopt};
    c.n0 = {10, 6, 0};
    c.n1 = {10, 8, 2};
    return c;
}

SweepResult sample_result() {
    SweepResult r;
    r.curves = {sample_curve()};
    r.qubrats = {{"WT", 91.5, 88.25, 90.0}};
    return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace

TEST_CASE("curves CSV layout: header plus 4 series per grid point, sorted") {
    const auto dir = fresh_dir("csv");
    emit_curves_csv(sample_result(), dir / "curves.csv");
    const auto rows = parse_csv(slurp(dir / "curves.csv"));
    REQUIRE(rows.size() == 1 + 3 * 4);
    CHECK(rows[0] == std::vector<std::string>{"metric", "scope", "tau", "series", "value",
                                              "n_retained"});
    // tau descends, series sorted D0 < D1 < FG < all within a tau
    const std::vector<std::string> series{"D0", "D1", "FG", "all"};
    const std::vector<std::string> taus{"100", "50", "0"};
    for (size_t t = 0; t < 3; ++t)
        for (size_t s = 0; s < 4; ++s) {
            const auto& row = rows[1 + t * 4 + s];
            CHECK(row[0] == "accuracy");
            CHECK(row[1] == "overall");
            CHECK(std::stod(row[2]) == std::stod(taus[t]));
            CHECK(row[3] == series[s]);
        }
    // the undefined D0 and FG points at tau = 0 have empty value fields
    CHECK(rows[9][4].empty());
    CHECK(rows[9][5] == "0");
    CHECK(rows[11][4].empty());
    // FG and all report combined retention
    CHECK(rows[3][5] == "20");
    CHECK(rows[4][5] == "20");
}

TEST_CASE("CSV values round-trip through text at 12 significant digits") {
    SweepResult r = sample_result();
    r.curves[0].em_d0[0] = 1.0 / 3.0;
    r.curves[0].fg[0] = 0.123456789012345;
    const auto dir = fresh_dir("roundtrip");
    emit_curves_csv(r, dir / "curves.csv");
    const auto rows = parse_csv(slurp(dir / "curves.csv"));
    CHECK(std::fabs(std::stod(rows[1][4]) - 1.0 / 3.0) < 1e-9);
    CHECK(std::fabs(std::stod(rows[3][4]) - 0.123456789012345) < 1e-9);
}

TEST_CASE("report outputs are byte deterministic") {
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    const SweepResult r = sample_result();
    emit_curves_csv(r, a / "c.csv");
    emit_curves_csv(r, b / "c.csv");
    emit_summary_json(r, a / "s.json");
    emit_summary_json(r, b / "s.json");
    emit_svg(r.curves[0], a / "p.svg");
    emit_svg(r.curves[0], b / "p.svg");
    CHECK(slurp(a / "c.csv") == slurp(b / "c.csv"));
    CHECK(slurp(a / "s.json") == slurp(b / "s.json"));
    CHECK(slurp(a / "p.svg") == slurp(b / "p.svg"));
}

TEST_CASE("summary JSON carries anchors, fractions and qubrats, canonically") {
    const auto dir = fresh_dir("summary");
    emit_summary_json(sample_result(), dir / "summary.json");
    const std::string text = slurp(dir / "summary.json");
    const json j = json::parse(text);

    const auto& c = j["curves"]["accuracy/overall"];
    CHECK(c["tau100"]["em_d0"] == doctest::Approx(0.9));
    CHECK(c["tau100"]["em_d1"] == doctest::Approx(0.8));
    CHECK(c["tau100"]["fg"] == doctest::Approx(0.1));
    CHECK(c["tau100"]["n_d0"] == 10);
    CHECK(c["tau100"]["n_d1"] == 10);
    CHECK(c.contains("fractions"));

    CHECK(j["qubrats"]["WT"]["d0"] == doctest::Approx(91.5));
    CHECK(j["qubrats"]["WT"]["all"] == doctest::Approx(90.0));

    // canonical form: parsing and re-dumping reproduces the bytes
    CHECK(j.dump(2) + "\n" == text);
}

TEST_CASE("SVG breaks the polyline at undefined points") {
    const auto dir = fresh_dir("svg");
    FairnessCurve c;
    c.metric = "accuracy";
    c.scope = "overall";
    c.taus = {100, 75, 50, 25, 0};
    c.em_d0 = {0.5, 0.6, std::nullopt, 0.8, 0.9};
    c.em_d1 = {0.5, 0.6, std::nullopt, 0.8, 0.9};
    c.em_all = {0.5, 0.6, std::nullopt, 0.8, 0.9};
    c.fg = {0.0, 0.0, std::nullopt, 0.0, 0.0};
    c.n0.assign(5, 4);
    c.n1.assign(5, 4);
    emit_svg(c, dir / "p.svg");
    const std::string svg = slurp(dir / "p.svg");

    // each of the 4 series splits into two segments around the gap
    size_t polylines = 0;
    for (size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1))
        ++polylines;
    CHECK(polylines == 8);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("viewport maps tau and values onto the plot rectangle") {
    const FairnessCurve c = sample_curve();
    const SvgViewport vp = svg_viewport_for(c);
    // x runs left to right as tau falls from 100 to 0
    CHECK(vp.map_x(100) == doctest::Approx(vp.margin_left));
    CHECK(vp.map_x(0) == doctest::Approx(vp.width - vp.margin_right));
    CHECK(vp.map_x(50) < vp.map_x(0));
    CHECK(vp.map_x(50) > vp.map_x(100));
    // extreme EM values land on the rectangle's horizontal edges
    CHECK(vp.map_em(vp.em_hi) == doctest::Approx(vp.margin_top));
    CHECK(vp.map_em(vp.em_lo) == doctest::Approx(vp.height - vp.margin_bottom));
    CHECK(vp.map_fg(vp.fg_lo) == doctest::Approx(vp.height - vp.margin_bottom));
    // the data range is covered
    CHECK(vp.em_lo <= 0.8);
    CHECK(vp.em_hi >= 0.99);
    CHECK(vp.fg_hi >= 0.1);
}

TEST_CASE("constant series still yields a usable viewport") {
    FairnessCurve c = sample_curve();
    c.em_d0 = {0.5, 0.5, 0.5};
    c.em_d1 = {0.5, 0.5, 0.5};
    c.em_all = {0.5, 0.5, 0.5};
    c.fg = {0.0, 0.0, 0.0};
    const SvgViewport vp = svg_viewport_for(c);
    CHECK(vp.em_hi > vp.em_lo);
    CHECK(vp.fg_hi > vp.fg_lo);
    const double y = vp.map_em(0.5);
    CHECK(y > vp.margin_top - 1e-9);
    CHECK(y < vp.height - vp.margin_bottom + 1e-9);
    const auto dir = fresh_dir("flat");
    CHECK_NOTHROW(emit_svg(c, dir / "flat.svg"));
}

TEST_CASE("emit_svg refuses a curve with fewer than two defined points") {
    FairnessCurve c = sample_curve();
    c.em_all = {0.5, std::nullopt, std::nullopt};
    const auto dir = fresh_dir("toofew");
    CHECK_THROWS_WITH_AS(emit_svg(c, dir / "x.svg"), doctest::Contains("TooFewPoints"),
                         ValidationError);
}

TEST_CASE("format_value") {
    CHECK(format_value(0.0) == "0");
    CHECK(format_value(1.0) == "1");
    CHECK(format_value(100.0) == "100");
    CHECK(std::stod(format_value(1.0 / 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-11));
}
