#include <doctest.h>

#include <regex>

#include "layoutprior/render.hpp"

using namespace layoutprior;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

const CategoryVocab& dinner() {
    static const CategoryVocab v = builtin_vocab(Scenario::dinner);
    return v;
}

ArrangementExample three_objects() {
    ArrangementExample ex;
    ex.conditions = {{{0.5, 0.5}, dinner().label_of("plate")},
                     {{0.1, 0.3}, dinner().label_of("fork")},
                     {{0.2, 0.2}, dinner().label_of("cup")}};
    ex.goal.positions = {{0.0, 0.0}, {-0.4, 0.0}, {0.5, 0.5}};
    return ex;
}

}  // namespace

TEST_CASE("overlay parsing") {
    CHECK(parse_overlay("layout") == OverlayMode::layout);
    CHECK(parse_overlay("plan-arrows") == OverlayMode::plan_arrows);
    CHECK(parse_overlay("kde-heatmap") == OverlayMode::kde_heatmap);
    CHECK_THROWS_AS((void)parse_overlay("heatmap"), UsageError);
}

TEST_CASE("empty scene draws only the table border") {
    const std::string svg = render_layout_svg(ArrangementExample{}, dinner(), RenderSpec{});
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(svg.ends_with("</svg>\n"));
    CHECK(count(svg, "<path ") == 1);
    CHECK(count(svg, "<rect ") == 0);
    CHECK(count(svg, "<text ") == 0);
}

TEST_CASE("objects map to rects with category colors") {
    RenderSpec spec;
    spec.canvas_px = 500;
    const std::string svg = render_layout_svg(three_objects(), dinner(), spec);
    CHECK(count(svg, "<rect ") == 3);
    CHECK(count(svg, "<text ") == 3);
    RenderSpec resolved = spec;
    resolved.resolve(dinner());
    for (const auto& c : three_objects().conditions) {
        CHECK(svg.find("fill=\"" + resolved.colors[c.label] + "\"") != std::string::npos);
    }
    // The view spans [-1.25, 1.25] over 500 px: the plate (side 0.5 at the origin) starts at 200 px
    // and is 100 px wide; y is flipped.
    CHECK(svg.find("<rect x=\"200.000\" y=\"200.000\" width=\"100.000\" height=\"100.000\"") != std::string::npos);
    CHECK(svg == render_layout_svg(three_objects(), dinner(), spec));

    RenderSpec custom;
    custom.colors.assign(dinner().size(), "#010203");
    CHECK(count(render_layout_svg(three_objects(), dinner(), custom), "fill=\"#010203\"") == 3);
}

TEST_CASE("render errors") {
    RenderSpec small;
    small.canvas_px = 127;
    CHECK_THROWS_AS((void)render_layout_svg(three_objects(), dinner(), small), UsageError);
    CHECK_THROWS_AS((void)render_kde_svg(KdeGrid{}, small), UsageError);
    RenderSpec short_palette;
    short_palette.colors = {"#000000"};
    CHECK_THROWS_AS((void)render_layout_svg(three_objects(), dinner(), short_palette), UsageError);
    auto broken = three_objects();
    broken.goal.positions.pop_back();
    CHECK_THROWS_AS((void)render_layout_svg(broken, dinner(), RenderSpec{}), DataError);
    KdeGrid ragged;
    ragged.resolution = 4;
    ragged.values.assign(15, 0.0);
    CHECK_THROWS_AS((void)render_kde_svg(ragged, RenderSpec{}), DataError);
}

TEST_CASE("plan and heatmap overlays") {
    RearrangePlan p;
    p.actions.push_back({ActionKind::move_away, 1, {-0.4, 0.0}, {-1.0, 0.0}});
    p.actions.push_back({ActionKind::pick_place, 2, {0.5, 0.5}, {0.5, -0.5}});
    const std::string svg = render_plan_svg(p, three_objects(), dinner(), RenderSpec{});
    CHECK(count(svg, "<line ") == 2);
    CHECK(count(svg, "stroke-dasharray") == 1);
    CHECK(count(svg, "<rect ") == 3);

    KdeGrid g;
    g.resolution = 8;
    g.values.assign(64, 0.0);
    g.values[9] = 1.0;
    const std::string heat = render_kde_svg(g, RenderSpec{});
    CHECK(count(heat, "<rect ") == 64);
    CHECK(count(heat, "fill=\"#0000ff\"") == 1);
    CHECK(count(heat, "fill=\"#ffffff\"") == 63);
}
