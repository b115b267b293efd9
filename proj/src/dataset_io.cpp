#include "layoutprior/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace layoutprior {

using nlohmann::json;

namespace {

json vocab_json(const CategoryVocab& vocab) {
    json arr = json::array();
    for (const auto& c : vocab.entries()) {
        arr.push_back({{"name", c.name},
                       {"container", c.is_container},
                       {"size", {c.default_size.x, c.default_size.y}}});
    }
    return arr;
}

double finite_number(const json& v, const char* what) {
    if (!v.is_number()) throw DataError(std::string(what) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw DataError(std::string("non-finite ") + what);
    return d;
}

Vec2 pair_of(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 2) throw DataError(std::string(what) + " must be a 2-element array");
    return {finite_number(v[0], what), finite_number(v[1], what)};
}

CategoryVocab parse_vocab(const json& arr) {
    if (!arr.is_array()) throw DataError("vocab must be an array");
    std::vector<Category> entries;
    for (const auto& e : arr) {
        entries.push_back({e.at("name").get<std::string>(), e.at("container").get<bool>(),
                           pair_of(e.at("size"), "category size")});
    }
    return CategoryVocab(std::move(entries));
}

Normalization parse_normalization(const json& j) {
    Normalization n{finite_number(j.at("width_m"), "width_m"), finite_number(j.at("height_m"), "height_m")};
    if (!(n.width_m > 0.0 && n.height_m > 0.0)) throw DataError("normalization extents must be positive");
    return n;
}

json example_json(const ArrangementExample& ex) {
    json objects = json::array();
    for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
        const auto& c = ex.conditions[i];
        const auto& p = ex.goal.positions.at(i);
        objects.push_back({{"label", c.label}, {"size", {c.size.x, c.size.y}}, {"pos", {p.x, p.y}}});
    }
    return {{"domain", ex.domain}, {"objects", objects}};
}

ArrangementExample parse_example(const json& j, const CategoryVocab& vocab) {
    if (!j.is_object()) throw DataError("example must be a JSON object");
    ArrangementExample ex;
    ex.domain = j.at("domain").get<std::string>();
    const auto& objects = j.at("objects");
    if (!objects.is_array()) throw DataError("\"objects\" must be an array");
    for (const auto& o : objects) {
        const auto& lab = o.at("label");
        if (!lab.is_number_integer()) throw DataError("label must be an integer");
        ObjectCondition c{pair_of(o.at("size"), "size"), lab.get<int>()};
        ex.conditions.push_back(c);
        ex.goal.positions.push_back(pair_of(o.at("pos"), "pos"));
    }
    validate(ex, vocab);
    return ex;
}

bool is_header(const json& j) { return j.is_object() && j.contains("format"); }

std::string error_text(const std::exception& e) {
    if (const auto* je = dynamic_cast<const json::exception*>(&e)) {
        return std::string("malformed JSON: ") + je->what();
    }
    return e.what();
}

}  // namespace

std::string vocab_to_json(const CategoryVocab& vocab) { return vocab_json(vocab).dump(); }

CategoryVocab vocab_from_json(const std::string& text) {
    try {
        return parse_vocab(json::parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed vocab JSON: ") + e.what());
    }
}

std::string header_line(const CategoryVocab& vocab, const Normalization& norm) {
    json h = {{"format", "layoutprior-dataset"},
              {"version", kDatasetFormatVersion},
              {"vocab", vocab_json(vocab)},
              {"normalization", {{"width_m", norm.width_m}, {"height_m", norm.height_m}}}};
    return h.dump();
}

std::string example_line(const ArrangementExample& ex) { return example_json(ex).dump(); }

ArrangementExample parse_example_line(const std::string& line, const CategoryVocab& vocab) {
    try {
        return parse_example(json::parse(line), vocab);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed JSON: ") + e.what());
    }
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    out << header_line(ds.vocab, ds.normalization) << '\n';
    for (const auto& ex : ds.examples) out << example_line(ex) << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_dataset(out, ds);
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

namespace {

struct ParsedFile {
    std::optional<CategoryVocab> vocab;
    Normalization normalization;
    std::vector<std::pair<std::size_t, std::string>> lines;  // (1-based line number, text)
};

ParsedFile read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    ParsedFile pf;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (number == 1) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw DataError(path.string() + ":1: malformed JSON: " + e.what());
            }
            if (is_header(j)) {
                try {
                    if (j.at("format").get<std::string>() != "layoutprior-dataset") {
                        throw DataError("unrecognized format tag");
                    }
                    if (j.at("version").get<int>() != kDatasetFormatVersion) {
                        throw DataError("unsupported dataset version");
                    }
                    pf.vocab = parse_vocab(j.at("vocab"));
                    if (j.contains("normalization")) pf.normalization = parse_normalization(j["normalization"]);
                } catch (const std::exception& e) {
                    throw DataError(path.string() + ":1: bad header: " + error_text(e));
                }
                continue;
            }
        }
        pf.lines.emplace_back(number, line);
    }
    return pf;
}

Dataset parse_body(const std::filesystem::path& path, ParsedFile pf, const CategoryVocab& vocab,
                   bool canonical) {
    Dataset ds;
    ds.vocab = vocab;
    ds.normalization = pf.normalization;
    std::string errors;
    std::size_t n_errors = 0;
    for (const auto& [number, text] : pf.lines) {
        try {
            auto ex = parse_example(json::parse(text), vocab);
            if (canonical) canonicalize(ex);
            ds.examples.push_back(std::move(ex));
        } catch (const std::exception& e) {
            if (n_errors++ < 20) {
                if (!errors.empty()) errors += "; ";
                errors += path.string() + ":" + std::to_string(number) + ": " + error_text(e);
            }
        }
    }
    if (n_errors > 0) {
        if (n_errors > 20) errors += "; ... (" + std::to_string(n_errors) + " invalid lines total)";
        throw DataError(errors);
    }
    return ds;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
    auto pf = read_lines(path);
    if (!pf.vocab) throw DataError(path.string() + ":1: missing dataset header line");
    auto vocab = *pf.vocab;
    return parse_body(path, std::move(pf), vocab, false);
}

Dataset import_examples(const std::filesystem::path& path, const CategoryVocab& vocab) {
    auto pf = read_lines(path);
    if (pf.vocab && !(*pf.vocab == vocab)) {
        throw DataError(path.string() + ":1: header vocab does not match the expected vocab");
    }
    return parse_body(path, std::move(pf), vocab, true);
}

SceneFile load_scene(const std::filesystem::path& path, bool allow_empty) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed JSON: " + e.what());
    }
    SceneFile sf;
    try {
        if (j.contains("vocab")) sf.vocab = parse_vocab(j["vocab"]);
        const auto vocab = sf.vocab ? *sf.vocab : builtin_vocab(parse_domain(j.at("domain").get<std::string>()).scenario);
        const bool empty = j.contains("objects") && j["objects"].is_array() && j["objects"].empty();
        if (allow_empty && empty) {
            sf.scene.domain = j.at("domain").get<std::string>();
        } else {
            sf.scene = parse_example(j, vocab);
        }
    } catch (const Error& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const std::exception& e) {
        throw DataError(path.string() + ": " + error_text(e));
    }
    return sf;
}

void save_scene(const std::filesystem::path& path, const ArrangementExample& scene, const CategoryVocab* vocab) {
    json j = example_json(scene);
    if (vocab) j["vocab"] = vocab_json(*vocab);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

CategoryVocab resolve_vocab(const SceneFile& scene) {
    if (scene.vocab) return *scene.vocab;
    return builtin_vocab(parse_domain(scene.scene.domain).scenario);
}

}  // namespace layoutprior
