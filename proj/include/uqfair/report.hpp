#pragma once

#include "uqfair/sweep.hpp"

#include <filesystem>
#include <string>

namespace uqfair {

// One row per (metric, scope, tau, series in {D0, D1, FG, all}), sorted by
// (metric, scope, tau descending, series). Undefined values are empty
// fields; 12 significant digits.
void emit_curves_csv(const SweepResult& result, const std::filesystem::path& path);

// Tau=100 anchors, QU-BraTS scalars where present and the
// desired-behavior fractions per curve, in canonical (sorted-key) JSON.
void emit_summary_json(const SweepResult& result, const std::filesystem::path& path);

// Standalone 800x500 SVG: x = 100 - tau, EM series on the left axis, FG on
// the right; undefined points break the polyline.
void emit_svg(const FairnessCurve& curve, const std::filesystem::path& path);

// The viewport transform used by emit_svg, exposed so tests can check the
// emitted coordinates.
struct SvgViewport {
    double width = 800, height = 500;
    double margin_left = 60, margin_right = 60, margin_top = 20, margin_bottom = 40;
    double em_lo = 0, em_hi = 1, fg_lo = 0, fg_hi = 1;

    double map_x(double tau) const;
    double map_em(double v) const;
    double map_fg(double v) const;
};
SvgViewport svg_viewport_for(const FairnessCurve& curve);

// 12-significant-digit number formatting shared by CSV and SVG.
std::string format_value(double v);

} // namespace uqfair
