#include <doctest.h>

#include <sstream>

#include "../support/tempdir.hpp"
#include "layoutprior/cli.hpp"
#include "layoutprior/dataset_io.hpp"
#include "layoutprior/planner.hpp"

using namespace layoutprior;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const testing::TempDir& d, const char* name) { return (d / name).string(); }

}  // namespace

TEST_CASE("number formatting") {
    CHECK(format_number(0.0) == "0.0");
    CHECK(format_number(2.0) == "2.0");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1e300) == "1e+300");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("usage errors") {
    auto r = cli({});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.rfind("error code=2 kind=usage: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    testing::TempDir d("cli-usage");
    r = cli({"gen-data", "--domain", "dinner-left", "--count", "0", "--seed", "1", "--out", p(d, "x.jsonl")});
    CHECK(r.code == kExitUsage);
    r = cli({"gen-data", "--domain", "kitchen-left", "--count", "3", "--seed", "1", "--out", p(d, "x.jsonl")});
    CHECK(r.code == kExitUsage);
    r = cli({"gen-data", "--domain", "dinner-left", "--count", "3", "--out", p(d, "x.jsonl")});
    CHECK(r.code == kExitUsage);
    r = cli({"plot", "--input", p(d, "x"), "--out", p(d, "y.svg"), "--mode", "sketch"});
    CHECK(r.code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("data errors") {
    testing::TempDir d("cli-data");
    auto r = cli({"train", "--data", p(d, "missing.jsonl"), "--ckpt", p(d, "c.bin"), "--seed", "1"});
    CHECK(r.code == kExitData);
    CHECK(r.err.rfind("error code=3 kind=data: ", 0) == 0);
    testing::spit(d / "bad.jsonl", "not json\n");
    r = cli({"eval", "--gen", p(d, "bad.jsonl"), "--gt", p(d, "bad.jsonl")});
    CHECK(r.code == kExitData);
}

TEST_CASE("gen-data is deterministic and eval of a set against itself is zero") {
    testing::TempDir d("cli-gen");
    const std::vector<std::string> base{"gen-data", "--domain", "dinner-left", "--count", "12", "--seed", "5", "--out"};
    auto a = base;
    a.push_back(p(d, "a.jsonl"));
    auto b = base;
    b.push_back(p(d, "b.jsonl"));
    REQUIRE(cli(a).code == kExitOk);
    REQUIRE(cli(b).code == kExitOk);
    CHECK(testing::slurp(d / "a.jsonl") == testing::slurp(d / "b.jsonl"));
    CHECK(load_dataset(d / "a.jsonl").examples.size() == 12);

    auto r = cli({"eval", "--metric", "coverage", "--gen", p(d, "a.jsonl"), "--gt", p(d, "a.jsonl")});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "0.0\n");

    r = cli({"gen-data", "--domain", "desk-vanilla", "--count", "3", "--seed", "5", "--source", "pipeline", "--out",
             p(d, "pipe.jsonl")});
    CHECK(r.code == kExitOk);
    CHECK(load_dataset(d / "pipe.jsonl").examples.size() == 3);
}

TEST_CASE("train, sample, eval and plot round trip") {
    testing::TempDir d("cli-flow");
    REQUIRE(cli({"gen-data", "--domain", "dinner-vanilla", "--count", "20", "--seed", "3", "--out", p(d, "data.jsonl")})
                .code == kExitOk);
    auto r = cli({"train", "--data", p(d, "data.jsonl"), "--ckpt", p(d, "net.ckpt"), "--seed", "9", "--steps", "15",
                  "--hidden", "16", "--embed", "8", "--head", "16", "--loss-csv", p(d, "loss.csv")});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("trained steps=15") != std::string::npos);

    const std::vector<std::string> sample{"sample", "--ckpt", p(d, "net.ckpt"), "--data", p(d, "data.jsonl"),
                                          "--count", "2", "--seed", "4", "--chunk", "8", "--out"};
    auto s1 = sample;
    s1.push_back(p(d, "s1.jsonl"));
    auto s2 = sample;
    s2.push_back(p(d, "s2.jsonl"));
    REQUIRE(cli(s1).code == kExitOk);
    REQUIRE(cli(s2).code == kExitOk);
    CHECK(testing::slurp(d / "s1.jsonl") == testing::slurp(d / "s2.jsonl"));
    CHECK(load_dataset(d / "s1.jsonl").examples.size() == 40);

    r = cli({"eval", "--metric", "all", "--gen", p(d, "s1.jsonl"), "--gt", p(d, "data.jsonl"), "--report",
             p(d, "report.csv"), "--dump-grids", p(d, "grids")});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("coverage ") == 0);
    CHECK(r.out.find("kl plate2fork ") != std::string::npos);
    CHECK(testing::slurp(d / "report.csv").rfind("domain,metric,pair,value,n_scenes\n", 0) == 0);

    r = cli({"plot", "--input", p(d, "grids") + "/plate2fork_reference.csv", "--mode", "kde-heatmap", "--out",
             p(d, "heat.svg")});
    CHECK(r.code == kExitOk);

    // Conditions from a scene file with a single output.
    const Dataset ds = load_dataset(d / "data.jsonl");
    save_scene(d / "scene.json", ds.examples.front(), &ds.vocab);
    r = cli({"sample", "--ckpt", p(d, "net.ckpt"), "--conditions", p(d, "scene.json"), "--seed", "1", "--out",
             p(d, "one.json")});
    CHECK(r.code == kExitOk);
    r = cli({"plot", "--input", p(d, "one.json"), "--out", p(d, "one.svg")});
    CHECK(r.code == kExitOk);
    CHECK(testing::slurp(d / "one.svg").find("<svg") == 0);

    // A vocab mismatch between checkpoint and conditions is a data error.
    REQUIRE(cli({"gen-data", "--domain", "desk-vanilla", "--count", "2", "--seed", "3", "--out", p(d, "desk.jsonl")})
                .code == kExitOk);
    r = cli({"sample", "--ckpt", p(d, "net.ckpt"), "--data", p(d, "desk.jsonl"), "--seed", "1", "--out",
             p(d, "x.jsonl")});
    CHECK(r.code == kExitData);
}

TEST_CASE("plan then simulate reaches the goal") {
    testing::TempDir d("cli-plan");
    const CategoryVocab vocab = builtin_vocab(Scenario::dinner);
    ArrangementExample init;
    init.domain = "dinner-vanilla";
    init.conditions = {{{0.2, 0.2}, vocab.label_of("cup")}, {{0.1, 0.3}, vocab.label_of("fork")}};
    init.goal.positions = {{-0.5, 0.0}, {0.3, 0.0}};
    ArrangementExample goal = init;
    goal.goal.positions = {{0.3, 0.0}, {-0.5, 0.2}};
    save_scene(d / "init.json", init);
    save_scene(d / "goal.json", goal);

    auto r = cli({"plan", "--initial", p(d, "init.json"), "--goal", p(d, "goal.json"), "--out", p(d, "plan.json")});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("(1 move-away)") != std::string::npos);
    r = cli({"simulate", "--plan", p(d, "plan.json"), "--initial", p(d, "init.json"), "--goal", p(d, "goal.json")});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "goal reached actions=3 collisions=0\n");
    CHECK(cli({"simulate", "--plan", p(d, "plan.json"), "--initial", p(d, "init.json")}).code == kExitOk);

    r = cli({"plot", "--input", p(d, "plan.json"), "--mode", "plan-arrows", "--initial", p(d, "init.json"), "--out",
             p(d, "plan.svg")});
    CHECK(r.code == kExitOk);

    // Simulating against the wrong initial layout is refused.
    r = cli({"simulate", "--plan", p(d, "plan.json"), "--initial", p(d, "goal.json")});
    CHECK(r.code == kExitData);

    // A hand-edited colliding plan is reported with both objects.
    RearrangePlan bad = load_plan(d / "plan.json");
    bad.actions.erase(bad.actions.begin());
    save_plan(d / "bad.json", bad);
    r = cli({"simulate", "--plan", p(d, "bad.json"), "--initial", p(d, "init.json")});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("collision") != std::string::npos);
}
