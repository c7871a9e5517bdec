#pragma once
// Activation-vector datasets: label maps, records, the line-oriented embedding
// file format and split helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "osr/error.hpp"

namespace osr {

// Class index: 0 is the collapsed unknown class, 1..N are the known classes.
using ClassIndex = std::size_t;
inline constexpr ClassIndex kUnknown = 0;
inline constexpr std::string_view kUnknownName = "unknown";

class LabelMap {
public:
    LabelMap() = default;

    explicit LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.size() < 2)
            throw ValidationError("label map needs at least 2 known classes, got " +
                                  std::to_string(names_.size()));
        std::unordered_set<std::string> seen;
        for (const auto& n : names_) {
            if (n.empty())
                throw ValidationError("label map contains an empty class name");
            if (n == kUnknownName)
                throw ValidationError("class name \"unknown\" is reserved for index 0");
            if (!seen.insert(n).second)
                throw ValidationError("duplicate class name in label map: " + n);
        }
    }

    // Number of known classes N.
    std::size_t size() const noexcept { return names_.size(); }

    const std::vector<std::string>& names() const noexcept { return names_; }

    const std::string& name(ClassIndex k) const {
        static const std::string unknown{kUnknownName};
        if (k == kUnknown)
            return unknown;
        if (k > names_.size())
            throw ValidationError("class index out of range: " + std::to_string(k));
        return names_[k - 1];
    }

    // Index of a class name; "unknown" maps to 0.
    std::optional<ClassIndex> find(std::string_view name) const {
        if (name == kUnknownName)
            return kUnknown;
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end())
            return std::nullopt;
        return static_cast<ClassIndex>(it - names_.begin()) + 1;
    }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    std::vector<std::string> names_;
};

enum class Split { train, eval, test };

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::eval: return "eval";
    case Split::test: return "test";
    }
    return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "eval") return Split::eval;
    if (s == "test") return Split::test;
    return std::nullopt;
}

struct EmbeddingRecord {
    std::string sample_id;
    Split split = Split::train;
    ClassIndex true_label = kUnknown;
    std::vector<double> activations; // final-layer logits v(x), length N
    std::string uuc_name;            // original genre of an unknown sample, if known

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t eval = 0;
    std::size_t test = 0;

    std::size_t of(Split s) const noexcept {
        switch (s) {
        case Split::train: return train;
        case Split::eval: return eval;
        case Split::test: return test;
        }
        return 0;
    }

    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetManifest {
    LabelMap label_map;
    std::vector<std::string> kkc_names;
    std::vector<std::string> uuc_names; // distinct unknown-genre names, first-seen order
    SplitCounts counts;
};

struct Dataset {
    std::vector<EmbeddingRecord> records;
    DatasetManifest manifest;
};

inline SplitCounts count_splits(std::span<const EmbeddingRecord> records) {
    SplitCounts c;
    for (const auto& r : records) {
        switch (r.split) {
        case Split::train: ++c.train; break;
        case Split::eval: ++c.eval; break;
        case Split::test: ++c.test; break;
        }
    }
    return c;
}

// Stable-order filter.
inline std::vector<EmbeddingRecord> split(std::span<const EmbeddingRecord> records, Split which) {
    std::vector<EmbeddingRecord> out;
    for (const auto& r : records)
        if (r.split == which)
            out.push_back(r);
    return out;
}

// Checks one record against the label map. `where` prefixes error messages.
inline void validate_record(const EmbeddingRecord& r, const LabelMap& labels, const std::string& where) {
    if (r.activations.size() != labels.size())
        throw ValidationError(where + "sample '" + r.sample_id + "' has " +
                              std::to_string(r.activations.size()) + " activations, expected " +
                              std::to_string(labels.size()));
    for (double a : r.activations)
        if (!std::isfinite(a))
            throw ValidationError(where + "sample '" + r.sample_id + "' has a non-finite activation");
    if (r.true_label > labels.size())
        throw ValidationError(where + "sample '" + r.sample_id + "' has label index out of range");
    if (r.true_label == kUnknown && r.split != Split::test)
        throw ValidationError(where + "sample '" + r.sample_id + "' is labeled unknown in the " +
                              std::string(to_string(r.split)) + " split; only test records may be unknown");
}

inline DatasetManifest make_manifest(std::span<const EmbeddingRecord> records, const LabelMap& labels) {
    DatasetManifest m;
    m.label_map = labels;
    m.kkc_names = labels.names();
    for (const auto& r : records) {
        if (r.true_label != kUnknown || r.uuc_name.empty())
            continue;
        if (labels.find(r.uuc_name) && r.uuc_name != kUnknownName)
            throw ValidationError("unknown-class genre '" + r.uuc_name + "' is also a known class");
        if (std::find(m.uuc_names.begin(), m.uuc_names.end(), r.uuc_name) == m.uuc_names.end())
            m.uuc_names.push_back(r.uuc_name);
    }
    m.counts = count_splits(records);
    return m;
}

// Parses the embedding file format: one JSON object per line,
// {"id": str, "split": "train"|"eval"|"test", "label": str, "v": [float x N]}
// with an optional "uuc" string naming the original genre of an unknown sample.
// Blank lines are skipped.
inline Dataset parse_dataset(std::istream& in, const LabelMap& labels, const std::string& source = "<stream>") {
    Dataset ds;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(where + "malformed row: " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("split") ||
            !j["split"].is_string() || !j.contains("label") || !j["label"].is_string() ||
            !j.contains("v") || !j["v"].is_array())
            throw ValidationError(where + "malformed row: expected {\"id\", \"split\", \"label\", \"v\"}");

        EmbeddingRecord r;
        r.sample_id = j["id"].get<std::string>();
        auto sp = parse_split(j["split"].get<std::string>());
        if (!sp)
            throw ValidationError(where + "sample '" + r.sample_id + "' has invalid split '" +
                                  j["split"].get<std::string>() + "'");
        r.split = *sp;
        const auto label = j["label"].get<std::string>();
        auto idx = labels.find(label);
        if (!idx)
            throw ValidationError(where + "sample '" + r.sample_id + "' has unknown label name '" + label + "'");
        r.true_label = *idx;
        r.activations.reserve(j["v"].size());
        for (const auto& x : j["v"]) {
            if (!x.is_number())
                throw ValidationError(where + "sample '" + r.sample_id + "' has a non-numeric activation");
            r.activations.push_back(x.get<double>());
        }
        if (j.contains("uuc")) {
            if (!j["uuc"].is_string())
                throw ValidationError(where + "sample '" + r.sample_id + "' has a non-string \"uuc\" field");
            r.uuc_name = j["uuc"].get<std::string>();
        }
        validate_record(r, labels, where);
        if (!ids.insert(r.sample_id).second)
            throw ValidationError(where + "duplicate sample id '" + r.sample_id + "'");
        ds.records.push_back(std::move(r));
    }
    ds.manifest = make_manifest(ds.records, labels);
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, const LabelMap& labels) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open embedding file: " + path.string());
    return parse_dataset(in, labels, path.string());
}

inline nlohmann::ordered_json record_to_json(const EmbeddingRecord& r, const LabelMap& labels) {
    nlohmann::ordered_json j;
    j["id"] = r.sample_id;
    j["split"] = std::string(to_string(r.split));
    j["label"] = labels.name(r.true_label);
    j["v"] = r.activations;
    if (!r.uuc_name.empty())
        j["uuc"] = r.uuc_name;
    return j;
}

// Doubles are emitted in shortest round-trip form.
inline void write_dataset(std::ostream& out, std::span<const EmbeddingRecord> records, const LabelMap& labels) {
    for (const auto& r : records)
        out << record_to_json(r, labels).dump() << '\n';
}

inline LabelMap parse_label_map(std::string_view text, const std::string& source = "<label map>") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(source + ": malformed label map: " + e.what());
    }
    if (!j.is_object() || !j.contains("classes") || !j["classes"].is_array())
        throw ValidationError(source + ": label map must be {\"classes\": [str, ...]}");
    std::vector<std::string> names;
    for (const auto& n : j["classes"]) {
        if (!n.is_string())
            throw ValidationError(source + ": class names must be strings");
        names.push_back(n.get<std::string>());
    }
    return LabelMap(std::move(names));
}

inline LabelMap load_label_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open label map: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_label_map(ss.str(), path.string());
}

inline void write_label_map(std::ostream& out, const LabelMap& labels) {
    nlohmann::ordered_json j;
    j["classes"] = labels.names();
    out << j.dump(2) << '\n';
}

// Index of the largest activation, ties to the smallest index, returned as a
// 1-based known-class index.
inline ClassIndex argmax_class(std::span<const double> v) {
    if (v.empty())
        throw ValidationError("argmax of an empty activation vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best])
            best = i;
    return best + 1;
}

// The closed-set classifier's decision for logits is their argmax.
inline std::vector<ClassIndex> closed_set_predictions(std::span<const EmbeddingRecord> records) {
    std::vector<ClassIndex> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(argmax_class(r.activations));
    return out;
}

inline std::vector<ClassIndex> true_labels(std::span<const EmbeddingRecord> records) {
    std::vector<ClassIndex> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(r.true_label);
    return out;
}

} // namespace osr
