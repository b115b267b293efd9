#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "layoutprior/core.hpp"
#include "layoutprior/metrics.hpp"
#include "layoutprior/planner.hpp"

namespace layoutprior {

enum class OverlayMode { layout, plan_arrows, kde_heatmap };

// Accepts "layout", "plan-arrows", "kde-heatmap"; UsageError otherwise.
[[nodiscard]] OverlayMode parse_overlay(std::string_view text);

struct RenderSpec {
    int canvas_px{512};
    std::vector<std::string> colors;  // one per category label; empty = built-in palette
    std::string stroke{"#222222"};
    double stroke_width{1.5};
    OverlayMode mode{OverlayMode::layout};

    // Fills in the palette when colors is empty; throws if the canvas is below 128 px or a
    // category lacks a color.
    void resolve(const CategoryVocab& vocab);
};

// Table border as a path, one rect per object (fill = category color) plus a text label.
[[nodiscard]] std::string render_layout_svg(const ArrangementExample& scene, const CategoryVocab& vocab,
                                            RenderSpec spec);

// Objects at their initial positions with one numbered arrow per action.
[[nodiscard]] std::string render_plan_svg(const RearrangePlan& plan, const ArrangementExample& initial,
                                          const CategoryVocab& vocab, RenderSpec spec);

// KDE grid as a grayscale heatmap over its window.
[[nodiscard]] std::string render_kde_svg(const KdeGrid& grid, RenderSpec spec);

}  // namespace layoutprior
