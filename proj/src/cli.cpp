#include "layoutprior/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "layoutprior/datagen.hpp"
#include "layoutprior/dataset_io.hpp"
#include "layoutprior/diffusion.hpp"
#include "layoutprior/metrics.hpp"
#include "layoutprior/planner.hpp"
#include "layoutprior/render.hpp"

namespace layoutprior {

namespace fs = std::filesystem;

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eninf") == std::string::npos) s += ".0";
    return s;
}

namespace {

struct GenDataArgs {
    std::string domain;
    int count{0};
    double jitter{0.03};
    double dropout{0.0};
    std::uint64_t seed{0};
    std::string out;
    std::string source{"synth"};
};

struct TrainArgs {
    std::string data;
    std::string ckpt;
    std::string loss_csv;
    std::uint64_t seed{0};
    TrainConfig train;
    ScoreNetConfig net;
    std::string activation{"silu"};
    std::string aggregation{"max"};
    std::string loss_weight{"sigma2"};
};

struct SampleArgs {
    std::string ckpt;
    std::string conditions;
    std::string data;
    std::string out;
    std::string sampler{"rk45"};
    int count{1};
    SamplerConfig cfg;
};

struct EvalArgs {
    std::string metric{"coverage"};
    std::string gen;
    std::string gt;
    std::vector<std::string> pairs;
    std::string domain;
    std::string report;
    std::string dump_grids;
    KdeConfig kde;
};

struct PlanArgs {
    std::string initial;
    std::string goal;
    std::string out;
    PlannerConfig cfg;
};

struct SimulateArgs {
    std::string plan;
    std::string initial;
    std::string goal;
};

struct PlotArgs {
    std::string input;
    std::string initial;
    std::string out;
    std::string mode{"layout"};
    std::string colors;
    int canvas{512};
    double grid_lo{-1.5};
    double grid_hi{1.5};
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw DataError("write to '" + path.string() + "' failed");
}

bool is_jsonl(const std::string& path) { return fs::path(path).extension() == ".jsonl"; }

std::string vocab_names(const CategoryVocab& v) {
    std::string s;
    for (const auto& c : v.entries()) s += (s.empty() ? "" : ",") + c.name;
    return s;
}

// Scene canonically ordered, as every module indexes objects that way.
ArrangementExample canonical_scene(const SceneFile& sf) {
    ArrangementExample ex = sf.scene;
    canonicalize(ex);
    return ex;
}

// --- commands ---------------------------------------------------------------------

void cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
    if (a.count < 1) throw UsageError("--count must be >= 1");
    const DomainTag tag = parse_domain(a.domain);
    const CategoryVocab vocab = builtin_vocab(tag.scenario);
    Dataset ds;
    if (a.source == "synth") {
        GeneratorConfig cfg{a.domain, a.jitter, a.seed, a.count, a.dropout};
        if (cfg.jitter_std < 0.0) throw UsageError("--jitter must be >= 0");
        if (cfg.optional_dropout < 0.0 || cfg.optional_dropout > 1.0) throw UsageError("--dropout must lie in [0, 1]");
        ds = synth_generate(cfg, vocab);
    } else if (a.source == "pipeline") {
        Providers providers = mock_providers(vocab);
        ds = run_pipeline(default_prompt(tag), providers, vocab, a.count, a.seed);
    } else {
        throw UsageError("--source must be synth or pipeline");
    }
    save_dataset(a.out, ds);
    out << "wrote " << ds.examples.size() << " examples to " << a.out << " domain=" << a.domain
        << " source=" << a.source << " seed=" << a.seed << " vocab=" << vocab_names(ds.vocab) << '\n';
}

void cmd_train(TrainArgs a, std::ostream& out) {
    const Dataset ds = load_dataset(a.data);
    if (a.activation == "silu") {
        a.net.activation = Activation::silu;
    } else if (a.activation == "relu") {
        a.net.activation = Activation::relu;
    } else {
        throw UsageError("--activation must be silu or relu");
    }
    if (a.aggregation == "max") {
        a.net.aggregation = Aggregation::max;
    } else if (a.aggregation == "mean") {
        a.net.aggregation = Aggregation::mean;
    } else {
        throw UsageError("--aggregation must be max or mean");
    }
    if (a.loss_weight == "sigma2") {
        a.train.loss_weight = LossWeight::sigma_squared;
    } else if (a.loss_weight == "unit") {
        a.train.loss_weight = LossWeight::unit;
    } else {
        throw UsageError("--loss-weight must be sigma2 or unit");
    }
    a.net.vocab_size = static_cast<int>(ds.vocab.size());
    a.net.seed = a.seed;
    a.net.validate();
    a.train.seed = a.seed;
    a.train.checkpoint_path = a.ckpt;
    const TrainResult r = train(ds, a.net, a.train);
    if (!a.loss_csv.empty()) write_loss_csv(a.loss_csv, r.losses);
    if (r.diverged) throw NumericalError(r.message + "; last good parameters saved to " + a.ckpt);
    out << "trained steps=" << r.losses.size() << " params=" << r.params.parameter_count()
        << " final_loss=" << (r.losses.empty() ? std::string("nan") : format_number(r.losses.back().loss))
        << " ckpt=" << a.ckpt << '\n';
}

void cmd_sample(SampleArgs a, std::ostream& out) {
    if (a.count < 1) throw UsageError("--count must be >= 1");
    if (a.conditions.empty() == a.data.empty()) throw UsageError("give exactly one of --conditions or --data");
    if (a.sampler == "rk45") {
        a.cfg.method = SamplerMethod::rk45;
    } else if (a.sampler == "euler") {
        a.cfg.method = SamplerMethod::euler;
    } else if (a.sampler != "random") {
        throw UsageError("--sampler must be rk45, euler or random");
    }
    const bool random = a.sampler == "random";
    if (!random && a.ckpt.empty()) throw UsageError("--ckpt is required unless --sampler random");

    CategoryVocab vocab;
    std::vector<ArrangementExample> sources;
    if (!a.conditions.empty()) {
        const SceneFile sf = load_scene(a.conditions);
        vocab = resolve_vocab(sf);
        sources.push_back(canonical_scene(sf));
    } else {
        Dataset ds = load_dataset(a.data);
        vocab = ds.vocab;
        sources = std::move(ds.examples);
    }
    std::vector<std::vector<ObjectCondition>> scenes;
    std::vector<std::string> domains;
    for (const auto& s : sources) {
        for (int k = 0; k < a.count; ++k) {
            scenes.push_back(s.conditions);
            domains.push_back(s.domain);
        }
    }

    std::vector<ArrangementExample> results;
    if (random) {
        results.resize(scenes.size());
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            Rng rng = stream_rng(a.cfg.seed, i);
            auto [c, l] = canonical_order(scenes[i], random_no_collision(scenes[i], rng));
            results[i].conditions = std::move(c);
            results[i].goal = std::move(l);
        }
    } else {
        const Checkpoint ck = load_checkpoint(a.ckpt);
        if (!(ck.vocab == vocab)) {
            throw DataError("condition vocab (" + vocab_names(vocab) + ") does not match checkpoint vocab (" +
                            vocab_names(ck.vocab) + ")");
        }
        results = sample_many(ck.params, scenes, a.cfg);
    }
    for (std::size_t i = 0; i < results.size(); ++i) results[i].domain = domains[i];

    if (is_jsonl(a.out)) {
        save_dataset(a.out, Dataset{vocab, Normalization{}, results});
    } else {
        if (results.size() != 1) throw UsageError("multiple samples need a .jsonl --out path");
        save_scene(a.out, results.front(), &vocab);
    }
    out << "wrote " << results.size() << " sampled layouts to " << a.out << " sampler=" << a.sampler
        << " seed=" << a.cfg.seed << '\n';
}

PairSpec parse_pair(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw UsageError("--pair must look like anchor:target, got '" + text + "'");
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

std::vector<PairSpec> default_pairs(const CategoryVocab& vocab) {
    if (vocab.find("plate") && vocab.find("fork")) return {{"plate", "fork"}};
    if (vocab.find("monitor") && vocab.find("keyboard")) return {{"monitor", "keyboard"}};
    return {};
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.metric != "coverage" && a.metric != "kl" && a.metric != "all") {
        throw UsageError("--metric must be coverage, kl or all");
    }
    const Dataset gen = load_dataset(a.gen);
    const Dataset gt = load_dataset(a.gt);
    if (!(gen.vocab == gt.vocab)) throw DataError("generated and ground-truth datasets use different vocabularies");
    const std::string domain = !a.domain.empty() ? a.domain : (gt.examples.empty() ? "" : gt.examples.front().domain);

    std::vector<std::pair<std::string, double>> printed;
    std::vector<EvalRow> rows;
    if (a.metric == "coverage" || a.metric == "all") {
        const double c = coverage_score(gen.examples, gt.examples);
        printed.emplace_back("coverage", c);
        rows.push_back({domain, "coverage", "", c, static_cast<int>(gt.examples.size())});
    }
    if (a.metric == "kl" || a.metric == "all") {
        std::vector<PairSpec> pairs;
        for (const auto& p : a.pairs) pairs.push_back(parse_pair(p));
        if (pairs.empty()) pairs = default_pairs(gt.vocab);
        if (pairs.empty()) throw UsageError("no default category pair for this vocabulary; pass --pair");
        for (const auto& p : pairs) {
            const MarginalKl kl = marginal_kl(gen.examples, gt.examples, gt.vocab, p, a.kde);
            printed.emplace_back("kl " + p.name(), kl.scaled);
            rows.push_back({domain, "marginal_kl_x100", p.name(), kl.scaled, kl.reference_scenes});
            if (!a.dump_grids.empty()) {
                fs::create_directories(a.dump_grids);
                std::ostringstream r, g;
                write_grid_csv(r, kl.reference);
                write_grid_csv(g, kl.generated);
                write_text(fs::path(a.dump_grids) / (p.name() + "_reference.csv"), r.str());
                write_text(fs::path(a.dump_grids) / (p.name() + "_generated.csv"), g.str());
            }
        }
    }
    if (!a.report.empty()) {
        std::ostringstream r;
        write_report_csv(r, rows);
        write_text(a.report, r.str());
    }
    if (printed.size() == 1) {
        out << format_number(printed.front().second) << '\n';
    } else {
        for (const auto& [name, v] : printed) out << name << ' ' << format_number(v) << '\n';
    }
}

void cmd_plan(const PlanArgs& a, std::ostream& out) {
    const SceneFile init_file = load_scene(a.initial);
    const SceneFile goal_file = load_scene(a.goal);
    const CategoryVocab vocab = resolve_vocab(init_file);
    if (!(resolve_vocab(goal_file) == vocab)) throw DataError("initial and goal scenes use different vocabularies");
    const ArrangementExample init = canonical_scene(init_file);
    const ArrangementExample goal = canonical_scene(goal_file);
    if (init.conditions != goal.conditions) {
        throw DataError("goal scene objects do not match the initial scene (condition mismatch)");
    }
    const RearrangePlan p = plan(init.goal, goal.goal, init.conditions, vocab, a.cfg);
    save_plan(a.out, p);
    const auto away = std::count_if(p.actions.begin(), p.actions.end(),
                                    [](const PlanAction& x) { return x.kind == ActionKind::move_away; });
    out << "wrote plan with " << p.actions.size() << " actions (" << away << " move-away) to " << a.out << '\n';
}

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const RearrangePlan p = load_plan(a.plan);
    const ArrangementExample init = canonical_scene(load_scene(a.initial));
    if (p.initial_hash != 0 && p.initial_hash != layout_hash(init.goal)) {
        throw DataError("plan was computed for a different initial layout");
    }
    const SimulationReport r = simulate(p, init.goal, init.conditions);
    if (!r.collision_free) throw DataError("collision: " + r.message);
    bool reached = false;
    if (!a.goal.empty()) {
        const ArrangementExample goal = canonical_scene(load_scene(a.goal));
        if (goal.conditions != init.conditions) throw DataError("goal scene objects do not match the initial scene");
        reached = layouts_match(r.final_layout, goal.goal);
    } else {
        reached = layout_hash(r.final_layout) == p.goal_hash;
    }
    if (!reached) throw DataError("plan executed without collisions but the goal was not reached");
    out << "goal reached actions=" << p.actions.size() << " collisions=0\n";
}

std::vector<std::string> split_colors(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void cmd_plot(const PlotArgs& a, std::ostream& out) {
    RenderSpec spec;
    spec.canvas_px = a.canvas;
    spec.mode = parse_overlay(a.mode);
    if (!a.colors.empty()) spec.colors = split_colors(a.colors);
    std::string svg;
    switch (spec.mode) {
        case OverlayMode::layout: {
            const SceneFile sf = load_scene(a.input, true);
            const ArrangementExample scene = sf.scene.conditions.empty() ? sf.scene : canonical_scene(sf);
            svg = render_layout_svg(scene, resolve_vocab(sf), spec);
            break;
        }
        case OverlayMode::plan_arrows: {
            if (a.initial.empty()) throw UsageError("plan-arrows mode needs --initial");
            const SceneFile sf = load_scene(a.initial);
            svg = render_plan_svg(load_plan(a.input), canonical_scene(sf), resolve_vocab(sf), spec);
            break;
        }
        case OverlayMode::kde_heatmap:
            svg = render_kde_svg(read_grid_csv(a.input, a.grid_lo, a.grid_hi), spec);
            break;
    }
    write_text(a.out, svg);
    out << "wrote " << a.out << '\n';
}

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::data: return "data";
        case ErrorKind::numerical: return "numerical";
    }
    return "data";
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage: return kExitUsage;
        case ErrorKind::data: return kExitData;
        case ErrorKind::numerical: return kExitNumerical;
    }
    return kExitData;
}

int report(std::ostream& err, int code, const char* kind, std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error code=" << code << " kind=" << kind << ": " << msg << '\n';
    return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conditional score-based diffusion priors for tabletop layouts", "layoutprior"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value file mirroring the command-line flags ([subcommand] sections)");

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "Generate a training dataset");
    gen->add_option("--domain", gd.domain, "dinner-vanilla | dinner-left | desk-vanilla | desk-left")->required();
    gen->add_option("--count", gd.count, "Number of examples")->required();
    gen->add_option("--jitter", gd.jitter, "Gaussian jitter std in table units (synth source)");
    gen->add_option("--dropout", gd.dropout, "Drop probability per optional category (synth source)");
    gen->add_option("--seed", gd.seed, "Random seed")->required();
    gen->add_option("--out", gd.out, "Output JSONL path")->required();
    gen->add_option("--source", gd.source, "synth | pipeline (mock image/detector/refiner providers)");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train the score network with denoising score matching");
    tr->add_option("--data", ta.data, "Dataset JSONL")->required();
    tr->add_option("--ckpt", ta.ckpt, "Checkpoint output path")->required();
    tr->add_option("--seed", ta.seed, "Seed for initialization, shuffling and noise")->required();
    tr->add_option("--steps", ta.train.steps, "Optimizer steps");
    tr->add_option("--lr", ta.train.learning_rate, "Adam learning rate");
    tr->add_option("--batch", ta.train.batch_size, "Scenes per batch");
    tr->add_option("--t-floor", ta.train.t_floor, "Smallest diffusion time drawn");
    tr->add_option("--ema", ta.train.ema_decay, "Weight EMA decay (0 disables)");
    tr->add_option("--checkpoint-every", ta.train.checkpoint_every, "Checkpoint period in steps (0 = end only)");
    tr->add_option("--loss-csv", ta.loss_csv, "Write the per-step loss curve here");
    tr->add_option("--loss-weight", ta.loss_weight, "sigma2 | unit");
    tr->add_option("--hidden", ta.net.hidden_width, "EdgeConv hidden width");
    tr->add_option("--embed", ta.net.time_embed_dim, "Time embedding width (even)");
    tr->add_option("--head", ta.net.head_width, "Output head hidden width");
    tr->add_option("--activation", ta.activation, "silu | relu");
    tr->add_option("--aggregation", ta.aggregation, "max | mean");

    SampleArgs sa;
    auto* smp = app.add_subcommand("sample", "Sample goal layouts with the probability-flow ODE");
    smp->add_option("--ckpt", sa.ckpt, "Checkpoint (not needed for --sampler random)");
    smp->add_option("--conditions", sa.conditions, "Scene JSON whose objects condition the sample");
    smp->add_option("--data", sa.data, "Dataset JSONL; one sample set per example's objects");
    smp->add_option("--out", sa.out, "Scene JSON, or JSONL for several samples")->required();
    smp->add_option("--seed", sa.cfg.seed, "Prior noise seed")->required();
    smp->add_option("--count", sa.count, "Samples per condition set");
    smp->add_option("--sampler", sa.sampler, "rk45 | euler | random (collision-free uniform baseline)");
    smp->add_option("--atol", sa.cfg.atol, "RK45 absolute tolerance");
    smp->add_option("--rtol", sa.cfg.rtol, "RK45 relative tolerance");
    smp->add_option("--euler-steps", sa.cfg.euler_steps, "Fixed steps for the euler sampler");
    smp->add_option("--t-end", sa.cfg.t_end, "Terminal diffusion time");
    smp->add_option("--chunk", sa.cfg.chunk, "Scenes per jointly integrated system (0 = all)");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Coverage score and marginal KL");
    ev->add_option("--metric", ea.metric, "coverage | kl | all");
    ev->add_option("--gen", ea.gen, "Generated dataset JSONL")->required();
    ev->add_option("--gt", ea.gt, "Ground-truth dataset JSONL")->required();
    ev->add_option("--pair", ea.pairs, "anchor:target category pair for KL (repeatable)");
    ev->add_option("--domain", ea.domain, "Domain column of the report");
    ev->add_option("--report", ea.report, "Write CSV rows (domain,metric,pair,value,n_scenes)");
    ev->add_option("--dump-grids", ea.dump_grids, "Directory for the KDE grids as CSV matrices");
    ev->add_option("--bandwidth", ea.kde.bandwidth_x, "Fixed KDE bandwidth (0 = Scott's rule)")
        ->each([&ea](const std::string& v) { ea.kde.bandwidth_y = std::stod(v); });
    ev->add_option("--grid", ea.kde.resolution, "KDE grid resolution");

    PlanArgs pa;
    auto* pl = app.add_subcommand("plan", "Plan pick-place and move-away actions");
    pl->add_option("--initial", pa.initial, "Initial scene JSON")->required();
    pl->add_option("--goal", pa.goal, "Goal scene JSON")->required();
    pl->add_option("--out", pa.out, "Plan JSON output")->required();
    pl->add_option("--margin", pa.cfg.margin, "Overlap margin in table units");

    SimulateArgs sim;
    auto* si = app.add_subcommand("simulate", "Execute a plan kinematically and check the goal");
    si->add_option("--plan", sim.plan, "Plan JSON")->required();
    si->add_option("--initial", sim.initial, "Initial scene JSON")->required();
    si->add_option("--goal", sim.goal, "Goal scene JSON (default: the plan's goal hash)");

    PlotArgs po;
    auto* pt = app.add_subcommand("plot", "Render a layout, plan or KDE grid as SVG");
    pt->add_option("--input", po.input, "Scene JSON, plan JSON or grid CSV")->required();
    pt->add_option("--out", po.out, "SVG output path")->required();
    pt->add_option("--mode", po.mode, "layout | plan-arrows | kde-heatmap");
    pt->add_option("--initial", po.initial, "Initial scene for plan-arrows");
    pt->add_option("--canvas", po.canvas, "Canvas size in pixels (>= 128)");
    pt->add_option("--colors", po.colors, "Comma-separated colors, one per category");
    pt->add_option("--grid-lo", po.grid_lo, "Lower bound of the grid window");
    pt->add_option("--grid-hi", po.grid_hi, "Upper bound of the grid window");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return report(err, kExitUsage, "usage", e.what());
    }

    try {
        if (*gen) cmd_gen_data(gd, out);
        if (*tr) cmd_train(ta, out);
        if (*smp) cmd_sample(sa, out);
        if (*ev) cmd_eval(ea, out);
        if (*pl) cmd_plan(pa, out);
        if (*si) cmd_simulate(sim, out);
        if (*pt) cmd_plot(po, out);
    } catch (const Error& e) {
        return report(err, exit_code(e.kind()), kind_name(e.kind()), e.what());
    } catch (const std::exception& e) {
        return report(err, kExitData, "data", e.what());
    }
    return kExitOk;
}

}  // namespace layoutprior
