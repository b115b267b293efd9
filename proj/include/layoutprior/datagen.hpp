#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "layoutprior/core.hpp"
#include "layoutprior/dataset_io.hpp"
#include "layoutprior/util.hpp"

namespace layoutprior {

// --- prompt template ---------------------------------------------------------

struct PromptSpec {
    std::string adjective;
    std::string setting;
    std::vector<std::pair<std::string, int>> object_counts;  // (category, count > 0)
    std::string functional_layout;
    std::string viewpoint;
};

// "Realistic photo of <adjective> <setting> with <n1> <obj1>, ..., <functional layout>, <view point>"
// Counts 1..10 are spelled out, larger counts use digits; counts above one pluralize the noun.
[[nodiscard]] std::string build_prompt(const PromptSpec& spec, const CategoryVocab& vocab);

[[nodiscard]] PromptSpec default_prompt(DomainTag domain);
// Scenario from the setting text ("desk" -> desk), handedness from the layout clause ("left").
[[nodiscard]] DomainTag prompt_domain(const PromptSpec& spec);

// --- functional templates ----------------------------------------------------

enum class SlotRole { required, optional, extra };

struct TemplateSlot {
    std::string category;
    Vec2 position;  // table units
    SlotRole role{SlotRole::required};
};

// Canonical functional arrangement. Left-handed templates mirror the vanilla ones across x = 0.
// Required and optional slots make up synthetic examples; extra slots only give refinement a
// target for categories that can appear in prompts.
[[nodiscard]] std::vector<TemplateSlot> functional_template(DomainTag domain);

// Axis-aligned overlap with an optional margin. Touching boxes do not overlap.
[[nodiscard]] bool boxes_overlap(Vec2 center_a, Vec2 size_a, Vec2 center_b, Vec2 size_b,
                                 double margin = 0.0) noexcept;
[[nodiscard]] bool any_overlap(const std::vector<ObjectCondition>& conditions, const Layout& layout,
                               double margin = 0.0) noexcept;

// --- synthetic generator -----------------------------------------------------

struct GeneratorConfig {
    std::string domain{"dinner-vanilla"};
    double jitter_std{0.03};
    std::uint64_t seed{0};
    int count{1};
    double optional_dropout{0.0};  // per optional category
};

// Template + isotropic jitter + optional-object dropout, rejecting overlapping or off-table
// samples (1000 attempts per example). Per-example RNG streams keyed by (seed, index).
[[nodiscard]] Dataset synth_generate(const GeneratorConfig& cfg, const CategoryVocab& vocab);

[[nodiscard]] ArrangementExample mirror_x(const ArrangementExample& ex);

// Rand-No-Coll baseline: uniform placement on the table, rejecting collisions.
[[nodiscard]] Layout random_no_collision(const std::vector<ObjectCondition>& conditions, Rng& rng);

// --- two-stage pipeline emulation --------------------------------------------

// Image-normalized coordinates: the unit square, mapped onto the table by `normalize`.
inline constexpr Frame kImageFrame{{0.0, 0.0}, {1.0, 1.0}};

struct DetectedObject {
    Vec2 center;  // image-normalized
    Vec2 extent;  // image-normalized, > 0
    std::string category;
    double confidence{1.0};

    friend bool operator==(const DetectedObject&, const DetectedObject&) = default;
};

struct RefinementResult {
    std::vector<DetectedObject> kept;
    std::vector<DetectedObject> removed;
    std::string rationale_tag;
};

// Phase 1 drops off-prompt categories and duplicates beyond the prompt counts (highest
// confidence wins, ties to the lower detection index). Phase 2 snaps survivors onto the
// functional template of the prompt's domain, keeping each detected extent.
[[nodiscard]] RefinementResult mock_refine(const std::vector<DetectedObject>& detections,
                                           const PromptSpec& spec, const CategoryVocab& vocab);

struct ImageHandle {
    std::string prompt;
    std::uint64_t seed{0};
    std::vector<DetectedObject> content;  // what a perfect detector would see
};

class ImageGenerator {
public:
    virtual ~ImageGenerator() = default;
    virtual ImageHandle generate(const PromptSpec& spec, const std::string& prompt, std::uint64_t seed) = 0;
};

class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<DetectedObject> detect(const ImageHandle& image) = 0;
};

class Refiner {
public:
    virtual ~Refiner() = default;
    virtual RefinementResult refine(const std::vector<DetectedObject>& detections, const PromptSpec& spec) = 0;
};

struct CorruptionOptions {
    double duplicate_prob{0.3};    // per prompted category: add one or two extra instances
    double off_prompt_prob{0.4};   // per scene: add one or two unexpected objects
    double misplace_std{0.15};     // image-normalized placement noise around the template
};

// Emulates a misaligned image model: the prompted objects, randomly misplaced, with
// injected duplicates and off-prompt categories.
[[nodiscard]] std::vector<DetectedObject> corrupt_scene(const PromptSpec& spec, const CategoryVocab& vocab,
                                                        const CorruptionOptions& opts, Rng& rng);

class MockImageGenerator final : public ImageGenerator {
public:
    MockImageGenerator(CategoryVocab vocab, CorruptionOptions opts = {});
    ImageHandle generate(const PromptSpec& spec, const std::string& prompt, std::uint64_t seed) override;

private:
    CategoryVocab vocab_;
    CorruptionOptions opts_;
};

class MockDetector final : public Detector {
public:
    std::vector<DetectedObject> detect(const ImageHandle& image) override;
};

class MockRefiner final : public Refiner {
public:
    explicit MockRefiner(CategoryVocab vocab) : vocab_(std::move(vocab)) {}
    RefinementResult refine(const std::vector<DetectedObject>& detections, const PromptSpec& spec) override {
        return mock_refine(detections, spec, vocab_);
    }

private:
    CategoryVocab vocab_;
};

struct Providers {
    std::unique_ptr<ImageGenerator> generator;
    std::unique_ptr<Detector> detector;
    std::unique_ptr<Refiner> refiner;
};

[[nodiscard]] Providers mock_providers(const CategoryVocab& vocab);

// prompt -> image -> detections -> refinement -> table-unit example, `count` times.
[[nodiscard]] Dataset run_pipeline(const PromptSpec& spec, Providers& providers, const CategoryVocab& vocab,
                                   int count, std::uint64_t seed);

[[nodiscard]] ArrangementExample detections_to_example(const std::vector<DetectedObject>& objects,
                                                       const CategoryVocab& vocab, const std::string& domain);

}  // namespace layoutprior
