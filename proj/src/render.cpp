#include "layoutprior/render.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace layoutprior {

OverlayMode parse_overlay(std::string_view text) {
    if (text == "layout") return OverlayMode::layout;
    if (text == "plan-arrows") return OverlayMode::plan_arrows;
    if (text == "kde-heatmap") return OverlayMode::kde_heatmap;
    throw UsageError("unknown overlay mode '" + std::string(text) + "' (expected layout, plan-arrows or kde-heatmap)");
}

namespace {

const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

// Table units [-kView, kView]^2 are mapped onto the canvas so parked objects stay visible.
constexpr double kView = 1.25;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Canvas {
    double px;
    [[nodiscard]] double x(double u) const { return (u + kView) / (2.0 * kView) * px; }
    [[nodiscard]] double y(double v) const { return (kView - v) / (2.0 * kView) * px; }
    [[nodiscard]] double len(double d) const { return d / (2.0 * kView) * px; }
};

std::string header(int px) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px << "\" height=\"" << px << "\" viewBox=\"0 0 "
      << px << ' ' << px << "\">\n";
    return s.str();
}

std::string table_border(const Canvas& c, const RenderSpec& spec) {
    return "<path d=\"M " + num(c.x(-1)) + ' ' + num(c.y(-1)) + " L " + num(c.x(1)) + ' ' + num(c.y(-1)) + " L " +
           num(c.x(1)) + ' ' + num(c.y(1)) + " L " + num(c.x(-1)) + ' ' + num(c.y(1)) +
           " Z\" fill=\"#f7f3ea\" stroke=\"" + spec.stroke + "\" stroke-width=\"" + num(spec.stroke_width) +
           "\"/>\n";
}

void draw_objects(std::ostringstream& s, const Canvas& c, const ArrangementExample& scene, const CategoryVocab& vocab,
                  const RenderSpec& spec) {
    if (scene.conditions.size() != scene.goal.size()) throw DataError("render: scene conditions and positions differ");
    for (std::size_t i = 0; i < scene.conditions.size(); ++i) {
        const auto& cond = scene.conditions[i];
        const Vec2 p = scene.goal.positions[i];
        const std::string& name = vocab.at(cond.label).name;
        s << "<rect x=\"" << num(c.x(p.x - cond.size.x / 2)) << "\" y=\"" << num(c.y(p.y + cond.size.y / 2))
          << "\" width=\"" << num(c.len(cond.size.x)) << "\" height=\"" << num(c.len(cond.size.y)) << "\" fill=\""
          << spec.colors[cond.label] << "\" fill-opacity=\"0.8\" stroke=\"" << spec.stroke << "\" stroke-width=\""
          << num(spec.stroke_width) << "\"/>\n";
        s << "<text x=\"" << num(c.x(p.x)) << "\" y=\"" << num(c.y(p.y)) << "\" font-size=\"" << num(c.px / 40.0)
          << "\" text-anchor=\"middle\" dominant-baseline=\"middle\">" << escape(name) << "</text>\n";
    }
}

}  // namespace

void RenderSpec::resolve(const CategoryVocab& vocab) {
    if (canvas_px < 128) throw UsageError("render: canvas must be at least 128 px, got " + std::to_string(canvas_px));
    if (colors.empty()) {
        for (std::size_t i = 0; i < vocab.size(); ++i) colors.emplace_back(kPalette[i % std::size(kPalette)]);
    }
    if (colors.size() < vocab.size()) {
        throw UsageError("render: category '" + vocab.at(static_cast<int>(colors.size())).name + "' has no color");
    }
}

std::string render_layout_svg(const ArrangementExample& scene, const CategoryVocab& vocab, RenderSpec spec) {
    spec.resolve(vocab);
    const Canvas c{static_cast<double>(spec.canvas_px)};
    std::ostringstream s;
    s << header(spec.canvas_px) << table_border(c, spec);
    draw_objects(s, c, scene, vocab, spec);
    s << "</svg>\n";
    return s.str();
}

std::string render_plan_svg(const RearrangePlan& plan, const ArrangementExample& initial, const CategoryVocab& vocab,
                            RenderSpec spec) {
    spec.resolve(vocab);
    const Canvas c{static_cast<double>(spec.canvas_px)};
    std::ostringstream s;
    s << header(spec.canvas_px)
      << "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" "
         "markerHeight=\"6\" orient=\"auto\"><path d=\"M 0 0 L 10 5 L 0 10 Z\" fill=\"#333333\"/></marker></defs>\n"
      << table_border(c, spec);
    draw_objects(s, c, initial, vocab, spec);
    for (std::size_t a = 0; a < plan.actions.size(); ++a) {
        const auto& act = plan.actions[a];
        const bool away = act.kind == ActionKind::move_away;
        s << "<line x1=\"" << num(c.x(act.from.x)) << "\" y1=\"" << num(c.y(act.from.y)) << "\" x2=\""
          << num(c.x(act.to.x)) << "\" y2=\"" << num(c.y(act.to.y)) << "\" stroke=\"" << (away ? "#c0392b" : "#333333")
          << "\" stroke-width=\"" << num(spec.stroke_width) << "\"" << (away ? " stroke-dasharray=\"6 4\"" : "")
          << " marker-end=\"url(#arrow)\"/>\n";
        const Vec2 mid = 0.5 * (act.from + act.to);
        s << "<text x=\"" << num(c.x(mid.x)) << "\" y=\"" << num(c.y(mid.y)) << "\" font-size=\"" << num(c.px / 36.0)
          << "\" fill=\"#000000\">" << a + 1 << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string render_kde_svg(const KdeGrid& grid, RenderSpec spec) {
    if (spec.canvas_px < 128) throw UsageError("render: canvas must be at least 128 px");
    if (grid.resolution <= 0 || grid.values.size() != static_cast<std::size_t>(grid.resolution) * grid.resolution) {
        throw DataError("render: malformed KDE grid");
    }
    const double px = spec.canvas_px;
    const double cell = px / grid.resolution;
    const double peak = std::max(*std::max_element(grid.values.begin(), grid.values.end()), 1e-300);
    std::ostringstream s;
    s << header(spec.canvas_px);
    for (int iy = 0; iy < grid.resolution; ++iy) {
        for (int ix = 0; ix < grid.resolution; ++ix) {
            const double v = grid.values[static_cast<std::size_t>(iy) * grid.resolution + ix] / peak;
            const int shade = 255 - static_cast<int>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
            char color[8];
            std::snprintf(color, sizeof color, "#%02x%02x%02x", shade, shade, 255);
            s << "<rect x=\"" << num(ix * cell) << "\" y=\"" << num(px - (iy + 1) * cell) << "\" width=\"" << num(cell)
              << "\" height=\"" << num(cell) << "\" fill=\"" << color << "\"/>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace layoutprior
