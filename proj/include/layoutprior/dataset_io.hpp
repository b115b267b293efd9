#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "layoutprior/core.hpp"

namespace layoutprior {

// JSON-Lines dataset format. Line 1 is a header:
//   {"format":"layoutprior-dataset","version":1,"vocab":[...],"normalization":{...}}
// every following line is one example:
//   {"domain": str, "objects": [{"label": int, "size": [w,h], "pos": [x,y]}, ...]}
inline constexpr int kDatasetFormatVersion = 1;

[[nodiscard]] std::string vocab_to_json(const CategoryVocab& vocab);
[[nodiscard]] CategoryVocab vocab_from_json(const std::string& text);

[[nodiscard]] std::string header_line(const CategoryVocab& vocab, const Normalization& norm);
[[nodiscard]] std::string example_line(const ArrangementExample& ex);

// Parses one example line and validates it against vocab. Throws DataError.
[[nodiscard]] ArrangementExample parse_example_line(const std::string& line, const CategoryVocab& vocab);

void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

// Reads a file that starts with a header line.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path);

// Ingests externally produced example files. The header line is optional; when present its
// vocab must equal `vocab`. Every example is validated and canonically ordered. All invalid
// lines are collected into one DataError whose message names each line number.
[[nodiscard]] Dataset import_examples(const std::filesystem::path& path, const CategoryVocab& vocab);

// Scene file: a single example object, optionally carrying "vocab" and "normalization".
struct SceneFile {
    ArrangementExample scene;
    std::optional<CategoryVocab> vocab;
};

// allow_empty admits an empty object list (useful for rendering only).
[[nodiscard]] SceneFile load_scene(const std::filesystem::path& path, bool allow_empty = false);
void save_scene(const std::filesystem::path& path, const ArrangementExample& scene,
                const CategoryVocab* vocab = nullptr);

// Vocab resolution for scene files: embedded vocab wins, else the builtin vocab of the domain tag.
[[nodiscard]] CategoryVocab resolve_vocab(const SceneFile& scene);

}  // namespace layoutprior
