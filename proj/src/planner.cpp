#include "layoutprior/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "layoutprior/datagen.hpp"

namespace layoutprior {

using nlohmann::json;

std::string to_string(ActionKind kind) {
    return kind == ActionKind::pick_place ? "pick-place" : "move-away";
}

std::vector<int> order_objects(const std::vector<ObjectCondition>& conditions, const CategoryVocab& vocab) {
    std::vector<int> perm(conditions.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
        return vocab.is_container(conditions[a].label) && !vocab.is_container(conditions[b].label);
    });
    return perm;
}

const std::vector<Vec2>& parking_cells() {
    static const std::vector<Vec2> cells = [] {
        std::vector<Vec2> c{{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
        for (double s : {-0.5, 0.0, 0.5}) {
            c.push_back({s, -1.0});
            c.push_back({1.0, s});
            c.push_back({s, 1.0});
            c.push_back({-1.0, s});
        }
        return c;
    }();
    return cells;
}

bool layouts_match(const Layout& a, const Layout& b, double tolerance) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a.positions[i].x - b.positions[i].x) > tolerance ||
            std::abs(a.positions[i].y - b.positions[i].y) > tolerance) {
            return false;
        }
    }
    return true;
}

namespace {

bool at_position(Vec2 a, Vec2 b, double tol) { return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol; }

void check_inputs(const Layout& initial, const Layout& goal, const std::vector<ObjectCondition>& conditions,
                  const CategoryVocab& vocab) {
    if (initial.size() != conditions.size() || goal.size() != conditions.size()) {
        throw DataError("plan: initial (" + std::to_string(initial.size()) + "), goal (" +
                        std::to_string(goal.size()) + ") and conditions (" + std::to_string(conditions.size()) +
                        ") differ in length");
    }
    for (const auto& c : conditions) validate(c, vocab);
    for (std::size_t i = 0; i < initial.size(); ++i) {
        if (!is_finite(initial.positions[i]) || !is_finite(goal.positions[i])) {
            throw DataError("plan: non-finite position for object " + std::to_string(i));
        }
    }
    if (any_overlap(conditions, initial)) throw DataError("plan: initial layout has overlapping objects");
    if (any_overlap(conditions, goal)) throw DataError("plan: goal layout has overlapping objects");
}

}  // namespace

RearrangePlan plan(const Layout& initial, const Layout& goal, const std::vector<ObjectCondition>& conditions,
                   const CategoryVocab& vocab, const PlannerConfig& cfg) {
    check_inputs(initial, goal, conditions, vocab);
    RearrangePlan out;
    out.initial_hash = layout_hash(initial);
    out.goal_hash = layout_hash(goal);

    const auto n = static_cast<int>(conditions.size());
    const std::vector<int> order = order_objects(conditions, vocab);
    std::vector<Vec2> current = initial.positions;
    const auto& cells = parking_cells();

    auto parking_free = [&](int obj, Vec2 cell) {
        const Vec2 size = conditions[obj].size;
        for (int k = 0; k < n; ++k) {
            if (boxes_overlap(cell, size, goal.positions[k], conditions[k].size, cfg.margin)) return false;
            if (k != obj && boxes_overlap(cell, size, current[k], conditions[k].size, cfg.margin)) return false;
        }
        return true;
    };

    for (int rank = 0; rank < n; ++rank) {
        const int i = order[rank];
        if (at_position(current[i], goal.positions[i], cfg.goal_tolerance)) continue;
        for (int later = rank + 1; later < n; ++later) {
            const int j = order[later];
            if (!boxes_overlap(current[j], conditions[j].size, goal.positions[i], conditions[i].size, cfg.margin)) {
                continue;
            }
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < cells.size(); ++c) {
                const Vec2 d = cells[c] - current[j];
                const double dist = d.x * d.x + d.y * d.y;
                if (dist < best_d && parking_free(j, cells[c])) {
                    best = static_cast<int>(c);
                    best_d = dist;
                }
            }
            if (best < 0) {
                throw DataError("plan: no free parking cell for object " + std::to_string(j) +
                                " blocking the goal of object " + std::to_string(i));
            }
            out.actions.push_back({ActionKind::move_away, j, current[j], cells[best]});
            current[j] = cells[best];
        }
        out.actions.push_back({ActionKind::pick_place, i, current[i], goal.positions[i]});
        current[i] = goal.positions[i];
    }
    return out;
}

SimulationReport simulate(const RearrangePlan& plan, const Layout& initial,
                          const std::vector<ObjectCondition>& conditions) {
    if (initial.size() != conditions.size()) throw DataError("simulate: layout and conditions differ in length");
    const auto n = static_cast<int>(conditions.size());
    for (std::size_t a = 0; a < plan.actions.size(); ++a) {
        const int obj = plan.actions[a].object;
        if (obj < 0 || obj >= n) {
            throw DataError("simulate: action " + std::to_string(a) + " references object " + std::to_string(obj) +
                            " but the scene has " + std::to_string(n));
        }
    }
    SimulationReport r;
    r.final_layout = initial;
    auto& pos = r.final_layout.positions;
    for (std::size_t a = 0; a < plan.actions.size(); ++a) {
        const auto& act = plan.actions[a];
        pos[act.object] = act.to;
        for (int p = 0; p < n && r.collision_free; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (boxes_overlap(pos[p], conditions[p].size, pos[q], conditions[q].size)) {
                    r.collision_free = false;
                    r.failed_action = static_cast<int>(a);
                    r.colliding_pair = {p, q};
                    r.message = "action " + std::to_string(a) + " (" + to_string(act.kind) + " object " +
                                std::to_string(act.object) + ") leaves objects " + std::to_string(p) + " and " +
                                std::to_string(q) + " overlapping";
                    break;
                }
            }
        }
        if (!r.collision_free) break;
    }
    return r;
}

// --- JSON -------------------------------------------------------------------------

std::string plan_to_json(const RearrangePlan& plan) {
    json j;
    j["format"] = "layoutprior-plan";
    j["version"] = 1;
    j["initial_hash"] = hex64(plan.initial_hash);
    j["goal_hash"] = hex64(plan.goal_hash);
    j["actions"] = json::array();
    for (const auto& a : plan.actions) {
        j["actions"].push_back({{"kind", to_string(a.kind)},
                                {"object", a.object},
                                {"from", {a.from.x, a.from.y}},
                                {"to", {a.to.x, a.to.y}}});
    }
    return j.dump(2) + "\n";
}

namespace {

std::uint64_t parse_hex(const std::string& s) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used, 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw DataError("plan: bad hash '" + s + "'");
    return v;
}

Vec2 parse_point(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw DataError("plan: '" + what + "' must be a pair of numbers");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

RearrangePlan plan_from_json_impl(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("plan: malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("actions") || !j["actions"].is_array()) {
        throw DataError("plan: expected an object with an 'actions' array");
    }
    RearrangePlan p;
    if (j.contains("initial_hash")) p.initial_hash = parse_hex(j["initial_hash"].get<std::string>());
    if (j.contains("goal_hash")) p.goal_hash = parse_hex(j["goal_hash"].get<std::string>());
    std::size_t idx = 0;
    for (const auto& a : j["actions"]) {
        const std::string where = "action " + std::to_string(idx++);
        if (!a.is_object() || !a.contains("kind") || !a.contains("object") || !a.contains("from") ||
            !a.contains("to")) {
            throw DataError("plan: " + where + " needs kind, object, from and to");
        }
        PlanAction act;
        const auto kind = a["kind"].get<std::string>();
        if (kind == "pick-place") {
            act.kind = ActionKind::pick_place;
        } else if (kind == "move-away") {
            act.kind = ActionKind::move_away;
        } else {
            throw DataError("plan: " + where + " has unknown kind '" + kind + "'");
        }
        if (!a["object"].is_number_integer()) throw DataError("plan: " + where + " object must be an integer");
        act.object = a["object"].get<int>();
        act.from = parse_point(a["from"], where + ".from");
        act.to = parse_point(a["to"], where + ".to");
        p.actions.push_back(act);
    }
    return p;
}

}  // namespace

RearrangePlan plan_from_json(const std::string& text) {
    try {
        return plan_from_json_impl(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("plan: ") + e.what());
    }
}

void save_plan(const std::filesystem::path& path, const RearrangePlan& plan) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << plan_to_json(plan);
}

RearrangePlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return plan_from_json(ss.str());
}

}  // namespace layoutprior
