#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "layoutprior/cli.hpp"
#include "layoutprior/datagen.hpp"
#include "layoutprior/metrics.hpp"
#include "layoutprior/planner.hpp"
#include "layoutprior/schedule.hpp"

namespace py = pybind11;
using namespace layoutprior;

namespace {

using Point = std::pair<double, double>;
using Object = std::tuple<double, double, int>;  // width, height, label

Layout to_layout(const std::vector<Point>& points) {
    Layout l;
    for (const auto& [x, y] : points) l.positions.push_back({x, y});
    return l;
}

std::vector<Point> from_layout(const Layout& l) {
    std::vector<Point> out;
    for (const auto& p : l.positions) out.emplace_back(p.x, p.y);
    return out;
}

std::vector<ObjectCondition> to_conditions(const std::vector<Object>& objects) {
    std::vector<ObjectCondition> out;
    for (const auto& [w, h, label] : objects) out.push_back({{w, h}, label});
    return out;
}

Scenario to_scenario(const std::string& name) {
    if (name == "dinner") return Scenario::dinner;
    if (name == "desk") return Scenario::desk;
    throw UsageError("unknown scenario '" + name + "' (expected dinner or desk)");
}

py::dict example_dict(const ArrangementExample& ex) {
    py::list objects;
    for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
        py::dict o;
        o["label"] = ex.conditions[i].label;
        o["size"] = Point{ex.conditions[i].size.x, ex.conditions[i].size.y};
        o["pos"] = Point{ex.goal.positions[i].x, ex.goal.positions[i].y};
        objects.append(o);
    }
    py::dict d;
    d["domain"] = ex.domain;
    d["objects"] = objects;
    return d;
}

py::dict action_dict(const PlanAction& a) {
    py::dict d;
    d["kind"] = a.kind == ActionKind::pick_place ? "pick-place" : "move-away";
    d["object"] = a.object;
    d["from"] = Point{a.from.x, a.from.y};
    d["to"] = Point{a.to.x, a.to.y};
    return d;
}

PlanAction to_action(const py::dict& d) {
    const auto kind = d["kind"].cast<std::string>();
    if (kind != "pick-place" && kind != "move-away") throw DataError("unknown action kind '" + kind + "'");
    const auto from = d["from"].cast<Point>();
    const auto to = d["to"].cast<Point>();
    return {kind == "pick-place" ? ActionKind::pick_place : ActionKind::move_away, d["object"].cast<int>(),
            {from.first, from.second}, {to.first, to.second}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tabletop layout priors: data generation, metrics and rearrangement planning";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    m.def("sigma", [](double t) { return NoiseSchedule{}.sigma(t); }, py::arg("t"),
          "Noise level of the default variance-exploding schedule at diffusion time t in [0, 1].");

    m.def(
        "vocab",
        [](const std::string& scenario) {
            const CategoryVocab v = builtin_vocab(to_scenario(scenario));
            py::list out;
            for (const auto& c : v.entries()) {
                py::dict d;
                d["name"] = c.name;
                d["is_container"] = c.is_container;
                d["default_size"] = Point{c.default_size.x, c.default_size.y};
                out.append(d);
            }
            return out;
        },
        py::arg("scenario"), "Built-in categories of a scenario; the list index is the label.");

    m.def(
        "generate",
        [](const std::string& domain, int count, std::uint64_t seed, double jitter, double dropout) {
            const DomainTag tag = parse_domain(domain);
            const Dataset ds = synth_generate({domain, jitter, seed, count, dropout}, builtin_vocab(tag.scenario));
            py::list out;
            for (const auto& ex : ds.examples) out.append(example_dict(ex));
            return out;
        },
        py::arg("domain"), py::arg("count"), py::arg("seed"), py::arg("jitter") = 0.03, py::arg("dropout") = 0.0,
        "Synthetic examples of a domain such as 'dinner-left', canonically ordered.");

    m.def(
        "coverage_score",
        [](const std::vector<std::vector<Point>>& generated, const std::vector<std::vector<Point>>& ground_truth) {
            std::vector<Layout> g, t;
            for (const auto& l : generated) g.push_back(to_layout(l));
            for (const auto& l : ground_truth) t.push_back(to_layout(l));
            return coverage_score(g, t);
        },
        py::arg("generated"), py::arg("ground_truth"),
        "Sum over ground-truth layouts of the smallest squared distance to a generated layout.");

    m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"), py::arg("delta") = 1e-12,
          "Discrete KL(P || Q) in nats; delta replaces empty cells of Q.");

    m.def(
        "plan",
        [](const std::vector<Point>& initial, const std::vector<Point>& goal, const std::vector<Object>& objects,
           const std::string& scenario, double margin) {
            PlannerConfig cfg;
            cfg.margin = margin;
            const RearrangePlan p = plan(to_layout(initial), to_layout(goal), to_conditions(objects),
                                         builtin_vocab(to_scenario(scenario)), cfg);
            py::list out;
            for (const auto& a : p.actions) out.append(action_dict(a));
            return out;
        },
        py::arg("initial"), py::arg("goal"), py::arg("objects"), py::arg("scenario") = "dinner",
        py::arg("margin") = 0.01,
        "Pick-place and move-away actions taking the initial layout to the goal. objects holds (w, h, label).");

    m.def(
        "simulate",
        [](const std::vector<py::dict>& actions, const std::vector<Point>& initial, const std::vector<Object>& objects) {
            RearrangePlan p;
            for (const auto& a : actions) p.actions.push_back(to_action(a));
            const SimulationReport r = simulate(p, to_layout(initial), to_conditions(objects));
            py::dict d;
            d["collision_free"] = r.collision_free;
            d["final"] = from_layout(r.final_layout);
            d["failed_action"] = r.failed_action;
            d["colliding_pair"] = r.colliding_pair;
            d["message"] = r.message;
            return d;
        },
        py::arg("actions"), py::arg("initial"), py::arg("objects"),
        "Teleports objects action by action and reports the first overlap, if any.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one command-line invocation in process; returns (exit code, stdout, stderr).");
}
