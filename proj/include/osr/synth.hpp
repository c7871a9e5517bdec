#pragma once
// Deterministic synthetic activation-vector benchmark: isotropic Gaussian
// clusters for known classes and for unknown "genres" that only appear in test.
//
// Random streams: every cluster owns an independent std::mt19937_64 seeded
// with splitmix64(seed + 0x9E3779B97F4A7C15 * (stream + 1)), where stream is
// 2*j for known cluster j and 2*m + 1 for unknown cluster m. Within a cluster
// samples are drawn train, then eval, then test; each coordinate is one
// Box-Muller normal built from two 53-bit uniforms.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"

namespace osr {

struct ClusterSpec {
    std::string name;
    std::vector<double> center;
    double sigma = 1.0;
    std::size_t train = 0;
    std::size_t eval = 0;
    std::size_t test = 0;
};

struct SynthSpec {
    std::vector<ClusterSpec> known;   // one per class, in label order
    std::vector<ClusterSpec> unknown; // test-only clusters
    std::uint64_t seed = 0;
};

struct SynthData {
    LabelMap labels;
    std::vector<EmbeddingRecord> records;
    DatasetManifest manifest;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
}

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0, 1].
    double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    double normal() {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
};

inline void validate(const SynthSpec& spec) {
    const std::size_t n = spec.known.size();
    if (n < 2)
        throw ValidationError("synthetic benchmark needs at least 2 known clusters");
    auto check = [&](const ClusterSpec& c) {
        if (c.center.size() != n)
            throw ValidationError("cluster '" + c.name + "' center has length " + std::to_string(c.center.size()) +
                                  ", expected " + std::to_string(n));
        for (double x : c.center)
            if (!std::isfinite(x))
                throw ValidationError("cluster '" + c.name + "' center is not finite");
        if (!(c.sigma > 0.0) || !std::isfinite(c.sigma))
            throw ValidationError("cluster '" + c.name + "' needs sigma > 0");
    };
    for (const auto& c : spec.known)
        check(c);
    for (const auto& c : spec.unknown) {
        check(c);
        if (c.train || c.eval)
            throw ValidationError("unknown cluster '" + c.name + "' may only contribute test samples");
        if (c.name.empty())
            throw ValidationError("unknown clusters need a name");
    }
}

inline SynthData generate(const SynthSpec& spec) {
    validate(spec);
    std::vector<std::string> names;
    for (const auto& c : spec.known)
        names.push_back(c.name);
    SynthData out{LabelMap(std::move(names)), {}, {}};

    auto emit = [&](const ClusterSpec& c, std::uint64_t stream, ClassIndex label, bool unknown) {
        NormalStream rng(stream_seed(spec.seed, stream));
        const std::pair<Split, std::size_t> parts[] = {{Split::train, c.train}, {Split::eval, c.eval},
                                                       {Split::test, c.test}};
        for (const auto& [split, count] : parts) {
            for (std::size_t i = 0; i < count; ++i) {
                EmbeddingRecord r;
                r.sample_id = c.name + "-" + std::string(to_string(split)) + "-" + std::to_string(i);
                r.split = split;
                r.true_label = label;
                r.activations.resize(c.center.size());
                for (std::size_t d = 0; d < c.center.size(); ++d)
                    r.activations[d] = c.center[d] + c.sigma * rng.normal();
                if (unknown)
                    r.uuc_name = c.name;
                out.records.push_back(std::move(r));
            }
        }
    };
    for (std::size_t j = 0; j < spec.known.size(); ++j)
        emit(spec.known[j], 2 * j, j + 1, false);
    for (std::size_t m = 0; m < spec.unknown.size(); ++m)
        emit(spec.unknown[m], 2 * m + 1, kUnknown, true);
    out.manifest = make_manifest(out.records, out.labels);
    return out;
}

// One-hot known centers c * e_j. Each unknown cluster m sits at 2.5c on a
// window of min(3, N) consecutive coordinates, windows spread across the
// classes. For N >= 3 every unknown center is at least sqrt(14.75) c (about
// 3.84c) from every known center.
inline SynthSpec benchmark_spec(std::size_t num_known = 5, double c = 10.0, double sigma = 1.0,
                                std::size_t train = 200, std::size_t eval = 50, std::size_t test = 50,
                                std::size_t num_unknown = 2, std::size_t unknown_test = 100,
                                std::uint64_t seed = 20221118) {
    SynthSpec s;
    s.seed = seed;
    for (std::size_t j = 0; j < num_known; ++j) {
        ClusterSpec k;
        k.name = "class_" + std::to_string(j + 1);
        k.center.assign(num_known, 0.0);
        k.center[j] = c;
        k.sigma = sigma;
        k.train = train;
        k.eval = eval;
        k.test = test;
        s.known.push_back(std::move(k));
    }
    const std::size_t width = std::min<std::size_t>(3, num_known);
    for (std::size_t m = 0; m < num_unknown; ++m) {
        ClusterSpec u;
        u.name = "novel_" + std::to_string(m + 1);
        u.center.assign(num_known, 0.0);
        const std::size_t span = num_known - width;
        const std::size_t start = num_unknown > 1 ? (m * span) / (num_unknown - 1) : 0;
        for (std::size_t d = start; d < start + width; ++d)
            u.center[d] = 2.5 * c;
        u.sigma = sigma;
        u.test = unknown_test;
        s.unknown.push_back(std::move(u));
    }
    return s;
}

inline nlohmann::ordered_json synth_spec_to_json(const SynthSpec& s) {
    auto cluster = [](const ClusterSpec& c) {
        nlohmann::ordered_json j;
        j["name"] = c.name;
        j["center"] = c.center;
        j["sigma"] = c.sigma;
        j["train"] = c.train;
        j["eval"] = c.eval;
        j["test"] = c.test;
        return j;
    };
    nlohmann::ordered_json j;
    j["generator"] = "mt19937_64/splitmix64-streams/box-muller";
    j["seed"] = s.seed;
    j["known"] = nlohmann::ordered_json::array();
    for (const auto& c : s.known)
        j["known"].push_back(cluster(c));
    j["unknown"] = nlohmann::ordered_json::array();
    for (const auto& c : s.unknown)
        j["unknown"].push_back(cluster(c));
    return j;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    try {
        auto cluster = [](const nlohmann::json& c) {
            ClusterSpec k;
            k.name = c.at("name").get<std::string>();
            k.center = c.at("center").get<std::vector<double>>();
            k.sigma = c.at("sigma").get<double>();
            k.train = c.value("train", std::size_t{0});
            k.eval = c.value("eval", std::size_t{0});
            k.test = c.value("test", std::size_t{0});
            return k;
        };
        SynthSpec s;
        s.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& c : j.at("known"))
            s.known.push_back(cluster(c));
        if (j.contains("unknown"))
            for (const auto& c : j.at("unknown"))
                s.unknown.push_back(cluster(c));
        validate(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed synthetic spec: ") + e.what());
    }
}

} // namespace osr
