#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "osr/openmax.hpp"
#include "osr/synth.hpp"

using namespace osr;

TEST(Synth, CountsMatchSpec) {
    auto spec = benchmark_spec(5, 10.0, 1.0, 100, 0, 0, 2, 100);
    const auto data = generate(spec);
    EXPECT_EQ(data.manifest.counts, (SplitCounts{500, 0, 200}));
    EXPECT_EQ(data.labels.size(), 5u);
    EXPECT_EQ(data.manifest.uuc_names, (std::vector<std::string>{"novel_1", "novel_2"}));
    std::size_t unknown = 0;
    for (const auto& r : data.records) {
        if (r.true_label == kUnknown) {
            ++unknown;
            EXPECT_EQ(r.split, Split::test);
        }
    }
    EXPECT_EQ(unknown, 200u);
}

TEST(Synth, DeterministicBytes) {
    const auto spec = benchmark_spec(4, 10.0, 1.0, 20, 5, 5, 2, 10, 77);
    std::ostringstream a, b;
    const auto d1 = generate(spec), d2 = generate(spec);
    write_dataset(a, d1.records, d1.labels);
    write_dataset(b, d2.records, d2.labels);
    EXPECT_EQ(a.str(), b.str());
    auto other = spec;
    other.seed = 78;
    std::ostringstream c;
    const auto d3 = generate(other);
    write_dataset(c, d3.records, d3.labels);
    EXPECT_NE(a.str(), c.str());
}

TEST(Synth, TinySigmaCollapsesToCenters) {
    const auto data = generate(benchmark_spec(5, 10.0, 1e-9, 10, 2, 2, 2, 5));
    for (const auto& r : data.records) {
        if (r.true_label == kUnknown)
            continue;
        EXPECT_EQ(argmax_class(r.activations), r.true_label);
        EXPECT_NEAR(r.activations[r.true_label - 1], 10.0, 1e-6);
    }
}

TEST(Synth, AddingClustersLeavesExistingStreamsUntouched) {
    auto spec = benchmark_spec(5, 10.0, 1.0, 10, 0, 0, 1, 10);
    const auto base = generate(spec);
    spec.unknown.push_back(spec.unknown.front());
    spec.unknown.back().name = "extra";
    const auto more = generate(spec);
    for (std::size_t i = 0; i < base.records.size(); ++i)
        EXPECT_EQ(base.records[i], more.records[i]);
}

TEST(Synth, SampleMeansApproachCenters) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const double sigma = 0.5 + 0.1 * static_cast<double>(seed);
        const auto spec = benchmark_spec(5, 10.0, sigma, 400, 0, 0, 2, 400, seed);
        const auto data = generate(spec);
        auto check = [&](const ClusterSpec& c, auto pred) {
            std::vector<double> mean(5, 0.0);
            std::size_t n = 0;
            for (const auto& r : data.records)
                if (pred(r)) {
                    for (std::size_t d = 0; d < 5; ++d)
                        mean[d] += r.activations[d];
                    ++n;
                }
            for (auto& x : mean)
                x /= static_cast<double>(n);
            EXPECT_LE(euclidean(mean, c.center), 5.0 * sigma / std::sqrt(static_cast<double>(n)));
        };
        for (std::size_t j = 0; j < 5; ++j)
            check(spec.known[j], [&](const EmbeddingRecord& r) { return r.true_label == j + 1; });
        for (const auto& u : spec.unknown)
            check(u, [&](const EmbeddingRecord& r) { return r.uuc_name == u.name; });
    }
}

TEST(Synth, BenchmarkUnknownsAreFarFromKnownCenters) {
    const auto spec = benchmark_spec();
    for (const auto& u : spec.unknown)
        for (const auto& k : spec.known)
            EXPECT_GE(euclidean(u.center, k.center), 3.0 * 10.0);
}

TEST(Synth, SpecJsonRoundTrip) {
    const auto spec = benchmark_spec(3, 4.0, 0.5, 3, 2, 1, 1, 7, 9);
    const auto back = synth_spec_from_json(nlohmann::json::parse(synth_spec_to_json(spec).dump()));
    std::ostringstream a, b;
    const auto d1 = generate(spec), d2 = generate(back);
    write_dataset(a, d1.records, d1.labels);
    write_dataset(b, d2.records, d2.labels);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Synth, InvalidSpecs) {
    auto spec = benchmark_spec();
    spec.known[0].sigma = 0.0;
    EXPECT_THROW(generate(spec), ValidationError);
    spec = benchmark_spec();
    spec.unknown[0].train = 3;
    EXPECT_THROW(generate(spec), ValidationError);
    spec = benchmark_spec();
    spec.known[1].center.pop_back();
    EXPECT_THROW(generate(spec), ValidationError);
}
