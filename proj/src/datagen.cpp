#include "layoutprior/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

namespace layoutprior {

// --- prompt ------------------------------------------------------------------

namespace {

std::string count_word(int n) {
    static constexpr std::array<const char*, 11> words{"zero", "one", "two",   "three", "four", "five",
                                                       "six",  "seven", "eight", "nine",  "ten"};
    if (n >= 0 && n <= 10) return words[static_cast<std::size_t>(n)];
    return std::to_string(n);
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string plural(const std::string& noun) {
    if (ends_with(noun, "fe")) return noun.substr(0, noun.size() - 2) + "ves";
    if (ends_with(noun, "s") || ends_with(noun, "x") || ends_with(noun, "ch") || ends_with(noun, "sh")) {
        return noun + "es";
    }
    if (noun.size() >= 2 && noun.back() == 'y' && std::string_view("aeiou").find(noun[noun.size() - 2]) ==
                                                       std::string_view::npos) {
        return noun.substr(0, noun.size() - 1) + "ies";
    }
    return noun + "s";
}

}  // namespace

std::string build_prompt(const PromptSpec& spec, const CategoryVocab& vocab) {
    if (spec.object_counts.empty()) throw DataError("prompt needs at least one object");
    std::string out = "Realistic photo of " + spec.adjective + " " + spec.setting + " with ";
    bool first = true;
    for (const auto& [category, count] : spec.object_counts) {
        (void)vocab.label_of(category);
        if (count <= 0) throw DataError("prompt count for '" + category + "' must be positive");
        if (!first) out += ", ";
        first = false;
        out += count_word(count) + " " + (count == 1 ? category : plural(category));
    }
    if (!spec.functional_layout.empty()) out += ", " + spec.functional_layout;
    if (!spec.viewpoint.empty()) out += ", " + spec.viewpoint;
    return out;
}

PromptSpec default_prompt(DomainTag domain) {
    PromptSpec spec;
    spec.adjective = "the non-overlapping, well-organized";
    spec.viewpoint = "top-down";
    spec.functional_layout = domain.left_handed ? "left-handed layout" : "right-handed layout";
    if (domain.scenario == Scenario::dinner) {
        spec.setting = "table setting";
        spec.object_counts = {{"cup", 1}, {"plate", 1}, {"fork", 1}, {"knife", 1}, {"spoon", 1}};
    } else {
        spec.setting = "office desk";
        spec.object_counts = {{"monitor", 1}, {"keyboard", 1}, {"mouse", 1}, {"mug", 1}};
    }
    return spec;
}

DomainTag prompt_domain(const PromptSpec& spec) {
    DomainTag d;
    d.scenario = spec.setting.find("desk") != std::string::npos ? Scenario::desk : Scenario::dinner;
    d.left_handed = spec.functional_layout.find("left") != std::string::npos;
    return d;
}

// --- templates ---------------------------------------------------------------

std::vector<TemplateSlot> functional_template(DomainTag domain) {
    std::vector<TemplateSlot> slots;
    if (domain.scenario == Scenario::dinner) {
        slots = {
            {"plate", {0.0, -0.15}, SlotRole::required},
            {"fork", {-0.35, -0.15}, SlotRole::required},
            {"knife", {0.35, -0.15}, SlotRole::required},
            {"spoon", {0.47, -0.15}, SlotRole::optional},
            {"cup", {0.42, 0.30}, SlotRole::optional},
            {"saucer", {0.0, 0.45}, SlotRole::extra},
            {"mug", {-0.45, 0.35}, SlotRole::extra},
        };
    } else {
        slots = {
            {"monitor", {0.0, 0.50}, SlotRole::required},
            {"keyboard", {0.0, 0.05}, SlotRole::required},
            {"mouse", {0.55, 0.05}, SlotRole::required},
            {"mug", {-0.60, 0.35}, SlotRole::optional},
            {"tray", {-0.55, -0.45}, SlotRole::extra},
            {"notebook", {0.55, -0.45}, SlotRole::extra},
        };
    }
    if (domain.left_handed) {
        for (auto& s : slots) s.position.x = -s.position.x;
    }
    return slots;
}

bool boxes_overlap(Vec2 ca, Vec2 sa, Vec2 cb, Vec2 sb, double margin) noexcept {
    return std::abs(ca.x - cb.x) < 0.5 * (sa.x + sb.x) + margin &&
           std::abs(ca.y - cb.y) < 0.5 * (sa.y + sb.y) + margin;
}

bool any_overlap(const std::vector<ObjectCondition>& conditions, const Layout& layout, double margin) noexcept {
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        for (std::size_t j = i + 1; j < conditions.size(); ++j) {
            if (boxes_overlap(layout.positions[i], conditions[i].size, layout.positions[j], conditions[j].size,
                              margin)) {
                return true;
            }
        }
    }
    return false;
}

namespace {

bool on_table(Vec2 center, Vec2 size) {
    return std::abs(center.x) + 0.5 * size.x <= 1.0 && std::abs(center.y) + 0.5 * size.y <= 1.0;
}

}  // namespace

// --- synthetic generator -----------------------------------------------------

ArrangementExample mirror_x(const ArrangementExample& ex) {
    ArrangementExample out = ex;
    for (auto& p : out.goal.positions) p.x = -p.x;
    return out;
}

Dataset synth_generate(const GeneratorConfig& cfg, const CategoryVocab& vocab) {
    if (cfg.count < 1) throw UsageError("count must be >= 1");
    if (!(cfg.jitter_std >= 0.0) || !std::isfinite(cfg.jitter_std)) throw UsageError("jitter-std must be >= 0");
    if (!(cfg.optional_dropout >= 0.0 && cfg.optional_dropout <= 1.0)) {
        throw UsageError("optional dropout must lie in [0, 1]");
    }
    const DomainTag domain = parse_domain(cfg.domain);
    // Sample around the vanilla template and mirror afterwards, so handedness variants
    // generated from the same seed are exact mirror images.
    const auto slots = functional_template({domain.scenario, false});

    struct Slot {
        int label;
        Vec2 size;
        Vec2 position;
        bool optional;
    };
    std::vector<Slot> used;
    for (const auto& s : slots) {
        if (s.role == SlotRole::extra) continue;
        const int label = vocab.label_of(s.category);
        used.push_back({label, vocab.at(label).default_size, s.position, s.role == SlotRole::optional});
    }

    Dataset ds;
    ds.vocab = vocab;
    ds.examples.resize(static_cast<std::size_t>(cfg.count));
    parallel_for(ds.examples.size(), [&](std::size_t index) {
        Rng rng = stream_rng(cfg.seed, index);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            ArrangementExample ex;
            ex.domain = domain.str();
            bool ok = true;
            for (const auto& s : used) {
                const double keep_draw = uniform(rng, 0.0, 1.0);
                const double jx = cfg.jitter_std * standard_normal(rng);
                const double jy = cfg.jitter_std * standard_normal(rng);
                if (s.optional && keep_draw < cfg.optional_dropout) continue;
                const Vec2 p{s.position.x + jx, s.position.y + jy};
                if (!on_table(p, s.size)) ok = false;
                ex.conditions.push_back({s.size, s.label});
                ex.goal.positions.push_back(p);
            }
            if (!ok || any_overlap(ex.conditions, ex.goal)) continue;
            if (domain.left_handed) ex = mirror_x(ex);
            canonicalize(ex);
            ds.examples[index] = std::move(ex);
            return;
        }
        throw DataError("synth_generate: rejection sampling failed for example " + std::to_string(index) +
                        " after 1000 attempts");
    });
    return ds;
}

Layout random_no_collision(const std::vector<ObjectCondition>& conditions, Rng& rng) {
    for (int restart = 0; restart < 100; ++restart) {
        Layout layout;
        bool failed = false;
        for (std::size_t i = 0; i < conditions.size() && !failed; ++i) {
            const Vec2 size = conditions[i].size;
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                const Vec2 p{uniform(rng, -1.0 + 0.5 * size.x, 1.0 - 0.5 * size.x),
                             uniform(rng, -1.0 + 0.5 * size.y, 1.0 - 0.5 * size.y)};
                placed = true;
                for (std::size_t k = 0; k < layout.size() && placed; ++k) {
                    placed = !boxes_overlap(p, size, layout.positions[k], conditions[k].size);
                }
                if (placed) layout.positions.push_back(p);
            }
            failed = !placed;
        }
        if (!failed) return layout;
    }
    throw DataError("random_no_collision: could not place objects without collision");
}

// --- refinement --------------------------------------------------------------

namespace {

void check_detection(const DetectedObject& d) {
    if (!is_finite(d.center) || !is_finite(d.extent) || !(d.extent.x > 0.0) || !(d.extent.y > 0.0)) {
        throw DataError("detection '" + d.category + "' has a non-positive or non-finite extent");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
        throw DataError("detection '" + d.category + "' confidence outside [0, 1]");
    }
}

}  // namespace

RefinementResult mock_refine(const std::vector<DetectedObject>& detections, const PromptSpec& spec,
                             const CategoryVocab& vocab) {
    if (detections.empty()) throw DataError("mock_refine: no detections");
    for (const auto& d : detections) check_detection(d);

    std::map<std::string, int> wanted;
    for (const auto& [category, count] : spec.object_counts) {
        (void)vocab.label_of(category);
        if (count <= 0) throw DataError("prompt count for '" + category + "' must be positive");
        wanted[category] += count;
    }

    // Phase 1: per category, rank by confidence (desc), then detection index (asc).
    std::map<std::string, std::vector<std::size_t>> by_category;
    for (std::size_t i = 0; i < detections.size(); ++i) by_category[detections[i].category].push_back(i);
    std::vector<int> rank(detections.size(), -1);  // instance rank among kept, -1 = removed
    for (auto& [category, idx] : by_category) {
        const auto it = wanted.find(category);
        if (it == wanted.end()) continue;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return detections[a].confidence > detections[b].confidence;
        });
        const auto keep = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(it->second));
        for (std::size_t r = 0; r < keep; ++r) rank[idx[r]] = static_cast<int>(r);
    }

    // Phase 2: snap onto the template, stacking extra instances of a category downwards.
    const auto slots = functional_template(prompt_domain(spec));
    RefinementResult out;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (rank[i] < 0) {
            out.removed.push_back(detections[i]);
            continue;
        }
        DetectedObject d = detections[i];
        const auto slot = std::find_if(slots.begin(), slots.end(),
                                       [&](const TemplateSlot& s) { return s.category == d.category; });
        if (slot == slots.end()) throw DataError("no template slot for category '" + d.category + "'");
        const double table_height = 2.0 * d.extent.y / kImageFrame.extent.y;
        const Vec2 target{slot->position.x, slot->position.y - rank[i] * (table_height + 0.02)};
        d.center = denormalize(target, kImageFrame);
        out.kept.push_back(d);
    }
    if (out.kept.empty()) throw DataError("mock_refine: every detection was removed; scene is irrecoverable");
    out.rationale_tag = "removed=" + std::to_string(out.removed.size()) +
                        ";snapped=" + std::to_string(out.kept.size()) + ";template=" + prompt_domain(spec).str();
    return out;
}

// --- mock providers ----------------------------------------------------------

std::vector<DetectedObject> corrupt_scene(const PromptSpec& spec, const CategoryVocab& vocab,
                                          const CorruptionOptions& opts, Rng& rng) {
    const auto slots = functional_template(prompt_domain(spec));
    auto slot_of = [&](const std::string& category) {
        for (const auto& s : slots) {
            if (s.category == category) return s.position;
        }
        return Vec2{uniform(rng, -0.6, 0.6), uniform(rng, -0.6, 0.6)};
    };
    auto make = [&](const std::string& category, Vec2 extent_table) {
        const Vec2 table{slot_of(category).x + opts.misplace_std * 2.0 * standard_normal(rng),
                         slot_of(category).y + opts.misplace_std * 2.0 * standard_normal(rng)};
        DetectedObject d;
        d.category = category;
        d.center = denormalize(table, kImageFrame);
        d.extent = {0.5 * extent_table.x * kImageFrame.extent.x, 0.5 * extent_table.y * kImageFrame.extent.y};
        d.confidence = uniform(rng, 0.3, 1.0);
        return d;
    };

    std::vector<DetectedObject> out;
    for (const auto& [category, count] : spec.object_counts) {
        const Vec2 size = vocab.at(vocab.label_of(category)).default_size;
        int n = count;
        if (uniform(rng, 0.0, 1.0) < opts.duplicate_prob) n += 1 + static_cast<int>(uniform(rng, 0.0, 2.0));
        for (int k = 0; k < n; ++k) out.push_back(make(category, size));
    }
    if (uniform(rng, 0.0, 1.0) < opts.off_prompt_prob) {
        std::vector<std::string> pool{"vase", "phone", "napkin"};
        for (const auto& c : vocab.entries()) {
            const bool prompted = std::any_of(spec.object_counts.begin(), spec.object_counts.end(),
                                              [&](const auto& oc) { return oc.first == c.name; });
            if (!prompted) pool.push_back(c.name);
        }
        const int extra = 1 + static_cast<int>(uniform(rng, 0.0, 2.0));
        for (int k = 0; k < extra; ++k) {
            const auto pick = std::min(pool.size() - 1, static_cast<std::size_t>(uniform(rng, 0.0, 1.0) * pool.size()));
            out.push_back(make(pool[pick], {0.15, 0.15}));
        }
    }
    // Shuffle so that position in the list carries no information.
    for (std::size_t i = out.size(); i > 1; --i) {
        const auto j = std::min(i - 1, static_cast<std::size_t>(uniform(rng, 0.0, 1.0) * i));
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

MockImageGenerator::MockImageGenerator(CategoryVocab vocab, CorruptionOptions opts)
    : vocab_(std::move(vocab)), opts_(opts) {}

ImageHandle MockImageGenerator::generate(const PromptSpec& spec, const std::string& prompt, std::uint64_t seed) {
    Rng rng = stream_rng(seed, 0);
    return {prompt, seed, corrupt_scene(spec, vocab_, opts_, rng)};
}

std::vector<DetectedObject> MockDetector::detect(const ImageHandle& image) { return image.content; }

Providers mock_providers(const CategoryVocab& vocab) {
    return {std::make_unique<MockImageGenerator>(vocab), std::make_unique<MockDetector>(),
            std::make_unique<MockRefiner>(vocab)};
}

ArrangementExample detections_to_example(const std::vector<DetectedObject>& objects, const CategoryVocab& vocab,
                                         const std::string& domain) {
    ArrangementExample ex;
    ex.domain = domain;
    for (const auto& d : objects) {
        // TODO: replace the unit-square image frame with a calibrated image-to-table homography
        // once a real detector provider is plugged in.
        const Vec2 size{2.0 * d.extent.x / kImageFrame.extent.x, 2.0 * d.extent.y / kImageFrame.extent.y};
        ex.conditions.push_back({size, vocab.label_of(d.category)});
        ex.goal.positions.push_back(normalize(d.center, kImageFrame));
    }
    validate(ex, vocab);
    canonicalize(ex);
    return ex;
}

Dataset run_pipeline(const PromptSpec& spec, Providers& providers, const CategoryVocab& vocab, int count,
                     std::uint64_t seed) {
    if (count < 1) throw UsageError("count must be >= 1");
    if (!providers.generator || !providers.detector || !providers.refiner) {
        throw UsageError("run_pipeline: all three providers are required");
    }
    const std::string prompt = build_prompt(spec, vocab);
    const std::string domain = prompt_domain(spec).str();
    Dataset ds;
    ds.vocab = vocab;
    for (int i = 0; i < count; ++i) {
        const auto image = providers.generator->generate(spec, prompt, mix_seed(seed, static_cast<std::uint64_t>(i)));
        const auto detections = providers.detector->detect(image);
        const auto refined = providers.refiner->refine(detections, spec);
        ds.examples.push_back(detections_to_example(refined.kept, vocab, domain));
    }
    return ds;
}

}  // namespace layoutprior
