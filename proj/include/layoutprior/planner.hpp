#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "layoutprior/core.hpp"

namespace layoutprior {

enum class ActionKind { pick_place, move_away };

[[nodiscard]] std::string to_string(ActionKind kind);

struct PlanAction {
    ActionKind kind{ActionKind::pick_place};
    int object{0};
    Vec2 from;
    Vec2 to;

    friend bool operator==(const PlanAction&, const PlanAction&) = default;
};

struct RearrangePlan {
    std::vector<PlanAction> actions;
    std::uint64_t initial_hash{0};
    std::uint64_t goal_hash{0};

    friend bool operator==(const RearrangePlan&, const RearrangePlan&) = default;
};

struct PlannerConfig {
    double margin{0.01};          // 5 mm on a 1 m table
    double goal_tolerance{1e-9};  // per coordinate
};

// Stable sort: containers first, original index breaks ties.
[[nodiscard]] std::vector<int> order_objects(const std::vector<ObjectCondition>& conditions,
                                             const CategoryVocab& vocab);

// Sixteen slots on the table border: the four corners and three per edge.
[[nodiscard]] const std::vector<Vec2>& parking_cells();

// Object i moves to goal i. Objects already at their goal are left alone. Before each
// pick-place, every later object whose current box overlaps the mover's goal box (with margin)
// is sent to the nearest parking cell that is clear of current boxes and of all goal boxes.
[[nodiscard]] RearrangePlan plan(const Layout& initial, const Layout& goal,
                                 const std::vector<ObjectCondition>& conditions, const CategoryVocab& vocab,
                                 const PlannerConfig& cfg = {});

struct SimulationReport {
    Layout final_layout;
    bool collision_free{true};
    std::optional<int> failed_action;  // index into plan.actions
    std::optional<std::pair<int, int>> colliding_pair;
    std::string message;
};

// Teleports box centers action by action and checks pairwise overlap (margin 0) after each.
// Stops at the first collision. Throws DataError for out-of-range object indices.
[[nodiscard]] SimulationReport simulate(const RearrangePlan& plan, const Layout& initial,
                                        const std::vector<ObjectCondition>& conditions);

[[nodiscard]] bool layouts_match(const Layout& a, const Layout& b, double tolerance = 1e-9);

[[nodiscard]] std::string plan_to_json(const RearrangePlan& plan);
[[nodiscard]] RearrangePlan plan_from_json(const std::string& text);
void save_plan(const std::filesystem::path& path, const RearrangePlan& plan);
[[nodiscard]] RearrangePlan load_plan(const std::filesystem::path& path);

}  // namespace layoutprior
