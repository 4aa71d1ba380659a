#include "uqfair/report.hpp"
#include "uqfair/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace uqfair {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void emit_curves_csv(const SweepResult& result, const std::filesystem::path& path) {
    if (result.curves.empty()) throw ValidationError("no curves to emit");

    struct Row {
        std::string metric, scope, series;
        double tau;
        std::optional<double> value;
        size_t n_retained;
    };
    std::vector<Row> rows;
    for (const auto& c : result.curves) {
        for (size_t i = 0; i < c.taus.size(); ++i) {
            rows.push_back({c.metric, c.scope, "D0", c.taus[i], c.em_d0[i], c.n0[i]});
            rows.push_back({c.metric, c.scope, "D1", c.taus[i], c.em_d1[i], c.n1[i]});
            rows.push_back({c.metric, c.scope, "FG", c.taus[i], c.fg[i], c.n0[i] + c.n1[i]});
            rows.push_back({c.metric, c.scope, "all", c.taus[i], c.em_all[i], c.n0[i] + c.n1[i]});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.metric != b.metric) return a.metric < b.metric;
        if (a.scope != b.scope) return a.scope < b.scope;
        if (a.tau != b.tau) return a.tau > b.tau;
        return a.series < b.series;
    });

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("IoFailure: cannot write " + path.string());
    out << "metric,scope,tau,series,value,n_retained\n";
    for (const auto& r : rows) {
        out << r.metric << ',' << r.scope << ',' << format_value(r.tau) << ',' << r.series << ',';
        if (r.value) out << format_value(*r.value);
        out << ',' << r.n_retained << '\n';
    }
    if (!out) throw IoError("IoFailure writing " + path.string());
}

void emit_summary_json(const SweepResult& result, const std::filesystem::path& path) {
    if (result.curves.empty()) throw ValidationError("no curves to emit");
    json j; // nlohmann objects keep keys sorted, which is the canonical form here
    j["curves"] = json::object();
    for (const auto& c : result.curves) {
        json cj;
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        cj["metric"] = c.metric;
        cj["scope"] = c.scope;
        cj["error_like"] = c.error_like;
        cj["tau100"] = {{"em_d0", opt(c.em_d0.front())},
                        {"em_d1", opt(c.em_d1.front())},
                        {"em_all", opt(c.em_all.front())},
                        {"fg", opt(c.fg.front())},
                        {"n_d0", c.n0.front()},
                        {"n_d1", c.n1.front()}};
        try {
            const BehaviorFlags f = desired_behavior_flags(c);
            cj["fractions"] = {{"fg_improved", f.frac_fg},
                               {"em_d0_improved", f.frac_em_d0},
                               {"em_d1_improved", f.frac_em_d1},
                               {"em_all_improved", f.frac_em_all}};
        } catch (const ValidationError&) {
            cj["fractions"] = nullptr; // too few defined points
        }
        j["curves"][c.metric + "/" + c.scope] = std::move(cj);
    }
    if (!result.qubrats.empty()) {
        j["qubrats"] = json::object();
        for (const auto& q : result.qubrats) {
            auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
            j["qubrats"][q.region] = {{"d0", opt(q.d0)}, {"d1", opt(q.d1)}, {"all", opt(q.all)}};
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("IoFailure: cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("IoFailure writing " + path.string());
}

double SvgViewport::map_x(double tau) const {
    const double x0 = margin_left, x1 = width - margin_right;
    return x0 + (100.0 - tau) / 100.0 * (x1 - x0);
}
double SvgViewport::map_em(double v) const {
    const double y0 = height - margin_bottom, y1 = margin_top;
    if (em_hi == em_lo) return 0.5 * (y0 + y1);
    return y0 + (v - em_lo) / (em_hi - em_lo) * (y1 - y0);
}
double SvgViewport::map_fg(double v) const {
    const double y0 = height - margin_bottom, y1 = margin_top;
    if (fg_hi == fg_lo) return 0.5 * (y0 + y1);
    return y0 + (v - fg_lo) / (fg_hi - fg_lo) * (y1 - y0);
}

SvgViewport svg_viewport_for(const FairnessCurve& curve) {
    SvgViewport vp;
    double em_lo = 1e300, em_hi = -1e300, fg_hi = 0.0;
    for (size_t i = 0; i < curve.taus.size(); ++i) {
        for (const auto* s : {&curve.em_d0, &curve.em_d1, &curve.em_all}) {
            if ((*s)[i]) {
                em_lo = std::min(em_lo, *(*s)[i]);
                em_hi = std::max(em_hi, *(*s)[i]);
            }
        }
        if (curve.fg[i]) fg_hi = std::max(fg_hi, *curve.fg[i]);
    }
    if (em_lo > em_hi) {
        em_lo = 0.0;
        em_hi = 1.0;
    }
    if (em_lo == em_hi) {
        em_lo -= 0.5;
        em_hi += 0.5;
    }
    vp.em_lo = em_lo;
    vp.em_hi = em_hi;
    vp.fg_lo = 0.0;
    vp.fg_hi = fg_hi > 0.0 ? fg_hi : 1.0;
    return vp;
}

static void polylines(std::ostream& out, const SvgViewport& vp,
                      const std::vector<double>& taus,
                      const std::vector<std::optional<double>>& series, bool fg_axis,
                      const std::string& color) {
    std::vector<std::string> points;
    auto flush = [&] {
        if (points.size() >= 2) {
            out << "  <polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
            for (size_t i = 0; i < points.size(); ++i) out << (i ? " " : "") << points[i];
            out << "\"/>\n";
        }
        points.clear();
    };
    for (size_t i = 0; i < taus.size(); ++i) {
        if (!series[i]) {
            flush(); // undefined point breaks the line
            continue;
        }
        const double x = vp.map_x(taus[i]);
        const double y = fg_axis ? vp.map_fg(*series[i]) : vp.map_em(*series[i]);
        points.push_back(format_value(x) + "," + format_value(y));
    }
    flush();
}

void emit_svg(const FairnessCurve& curve, const std::filesystem::path& path) {
    size_t defined = 0;
    for (const auto& v : curve.em_all) defined += v.has_value() ? 1 : 0;
    if (defined < 2) throw ValidationError("TooFewPoints: SVG needs >= 2 defined points");

    const SvgViewport vp = svg_viewport_for(curve);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("IoFailure: cannot write " + path.string());
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << vp.width
        << "\" height=\"" << vp.height << "\" viewBox=\"0 0 " << vp.width << " " << vp.height
        << "\">\n";
    out << "  <title>" << curve.metric << " / " << curve.scope << "</title>\n";
    // axes
    out << "  <rect x=\"" << vp.margin_left << "\" y=\"" << vp.margin_top << "\" width=\""
        << vp.width - vp.margin_left - vp.margin_right << "\" height=\""
        << vp.height - vp.margin_top - vp.margin_bottom
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "  <text x=\"" << vp.width / 2 << "\" y=\"" << vp.height - 8
        << "\" text-anchor=\"middle\" font-size=\"13\">100 - uncertainty threshold</text>\n";
    out << "  <text x=\"15\" y=\"" << vp.height / 2 << "\" text-anchor=\"middle\" font-size=\"13\""
        << " transform=\"rotate(-90 15 " << vp.height / 2 << ")\">" << curve.metric
        << "</text>\n";
    out << "  <text x=\"" << vp.width - 15 << "\" y=\"" << vp.height / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(90 " << vp.width - 15
        << " " << vp.height / 2 << ")\">fairness gap</text>\n";

    polylines(out, vp, curve.taus, curve.em_d0, false, "#1f77b4");
    polylines(out, vp, curve.taus, curve.em_d1, false, "#d62728");
    polylines(out, vp, curve.taus, curve.em_all, false, "#555555");
    polylines(out, vp, curve.taus, curve.fg, true, "#2ca02c");
    out << "</svg>\n";
    if (!out) throw IoError("IoFailure writing " + path.string());
}

} // namespace uqfair
