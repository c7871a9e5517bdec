#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "osr/evaluate.hpp"
#include "osr/grid_search.hpp"
#include "osr/synth.hpp"

using namespace osr;

namespace {

struct Bench {
    SynthData data;
    std::vector<EmbeddingRecord> train, test;
    std::vector<ClassIndex> train_preds;
};

const Bench& bench() {
    static const Bench b = [] {
        Bench x;
        x.data = generate(benchmark_spec(4, 10.0, 1.0, 60, 10, 20, 2, 40, 5));
        x.train = split(x.data.records, Split::train);
        x.test = split(x.data.records, Split::test);
        x.train_preds = closed_set_predictions(x.train);
        return x;
    }();
    return b;
}

SweepSpec small_spec() {
    SweepSpec s;
    s.alphas = {2, 3, 4};
    s.tails = {10, 20};
    s.epsilons = {0.1, 0.5, 0.9};
    s.methods = {Method::softmax_threshold, Method::openmax_threshold};
    return s;
}

} // namespace

TEST(SweepSpec, Defaults) {
    const auto s = default_sweep_spec(5);
    EXPECT_EQ(s.alphas, (std::vector<std::size_t>{3, 4, 5}));
    EXPECT_EQ(default_sweep_spec(5, false).alphas, (std::vector<std::size_t>{2, 3, 4, 5}));
    EXPECT_EQ(default_sweep_spec(10).alphas.front(), 5u);
    EXPECT_EQ(s.tails, (std::vector<std::size_t>{20, 25, 30, 35, 40}));
    ASSERT_EQ(s.epsilons.size(), 19u);
    EXPECT_DOUBLE_EQ(s.epsilons.front(), 0.05);
    EXPECT_DOUBLE_EQ(s.epsilons.back(), 0.95);
}

TEST(SweepSpec, Validation) {
    auto s = small_spec();
    s.alphas.push_back(9);
    EXPECT_THROW(validate(s, 4), ValidationError);
    s = small_spec();
    s.tails = {1};
    EXPECT_THROW(validate(s, 4), ValidationError);
    s = small_spec();
    s.epsilons = {1.2};
    EXPECT_THROW(validate(s, 4), ValidationError);
    s = small_spec();
    s.epsilons.clear();
    EXPECT_THROW(validate(s, 4), ValidationError);
}

TEST(Sweep, RowsMatchIndependentEvaluation) {
    const auto& b = bench();
    const auto r = sweep(b.data.labels, b.train, b.train_preds, b.test, small_spec());
    ASSERT_EQ(r.rows.size(), 3u + 3u * 2u * 3u);
    EXPECT_EQ(r.calibrations, 6u);
    for (const auto& row : r.rows) {
        ASSERT_TRUE(row.ok());
        double expected = 0.0;
        if (row.method == Method::softmax_threshold) {
            expected = evaluate_softmax(b.test, 4, row.epsilon).accuracy;
        } else {
            const auto m = calibrate(b.data.labels, b.train, b.train_preds, {row.alpha, row.tail});
            expected = evaluate_openmax(m, b.test, row.epsilon).accuracy;
        }
        EXPECT_EQ(*row.accuracy, expected);
    }
}

TEST(Sweep, BestIsMaximumWithTieBreaks) {
    const auto& b = bench();
    const auto r = sweep(b.data.labels, b.train, b.train_preds, b.test, small_spec());
    for (Method m : {Method::softmax_threshold, Method::openmax_threshold}) {
        const auto* best = r.best_for(m);
        ASSERT_NE(best, nullptr);
        for (const auto& row : r.rows) {
            if (row.method != m)
                continue;
            EXPECT_LE(*row.accuracy, *best->accuracy);
            if (*row.accuracy == *best->accuracy) {
                EXPECT_GE(row.epsilon, best->epsilon);
                if (row.epsilon == best->epsilon) {
                    EXPECT_GE(row.alpha, best->alpha);
                    if (row.alpha == best->alpha)
                        EXPECT_GE(row.tail, best->tail);
                }
            }
        }
    }
}

TEST(Sweep, OrderInvariantAndDeterministic) {
    const auto& b = bench();
    auto shuffled = small_spec();
    std::reverse(shuffled.alphas.begin(), shuffled.alphas.end());
    std::reverse(shuffled.epsilons.begin(), shuffled.epsilons.end());
    std::reverse(shuffled.methods.begin(), shuffled.methods.end());
    shuffled.tails = {20, 10, 20};
    const auto a = sweep(b.data.labels, b.train, b.train_preds, b.test, small_spec());
    const auto c = sweep(b.data.labels, b.train, b.train_preds, b.test, shuffled);
    const auto t = sweep(b.data.labels, b.train, b.train_preds, b.test, small_spec(), {4});
    EXPECT_EQ(a.rows, c.rows);
    EXPECT_EQ(a.best, c.best);
    EXPECT_EQ(sweep_to_csv(a), sweep_to_csv(t));
    EXPECT_EQ(a.calibrations, t.calibrations);
}

TEST(Sweep, SingleCellEqualsDirectEvaluation) {
    const auto& b = bench();
    SweepSpec s;
    s.alphas = {3};
    s.tails = {15};
    s.epsilons = {0.4};
    s.methods = {Method::openmax_threshold};
    const auto r = sweep(b.data.labels, b.train, b.train_preds, b.test, s);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.calibrations, 1u);
    const auto m = calibrate(b.data.labels, b.train, b.train_preds, {3, 15});
    EXPECT_EQ(*r.rows[0].accuracy, evaluate_openmax(m, b.test, 0.4).accuracy);
    EXPECT_EQ(r.best.size(), 1u);
}

TEST(Sweep, SoftmaxCurveMaxMatchesExhaustiveReevaluation) {
    const auto& b = bench();
    SweepSpec s;
    s.epsilons = default_epsilons();
    s.methods = {Method::softmax_threshold};
    const auto r = sweep(b.data.labels, b.train, b.train_preds, b.test, s);
    EXPECT_EQ(r.calibrations, 0u);
    double best = 0.0;
    for (double e : s.epsilons)
        best = std::max(best, evaluate_softmax(b.test, 4, e).accuracy);
    EXPECT_EQ(*r.best_for(Method::softmax_threshold)->accuracy, best);
}

TEST(Sweep, CalibrationFailureRecordedPerRow) {
    const auto& b = bench();
    // Drop every training sample of class 2: its MAV cannot be computed.
    std::vector<EmbeddingRecord> train;
    for (const auto& r : b.train)
        if (r.true_label != 2)
            train.push_back(r);
    const auto preds = closed_set_predictions(train);
    const auto r = sweep(b.data.labels, train, preds, b.test, small_spec());
    EXPECT_EQ(r.rows.size(), 21u);
    for (const auto& row : r.rows) {
        if (row.method == Method::openmax_threshold) {
            EXPECT_FALSE(row.ok());
            EXPECT_NE(row.error.find("class_2"), std::string::npos);
        }
    }
    EXPECT_EQ(r.best_for(Method::openmax_threshold), nullptr);
    EXPECT_NE(r.best_for(Method::softmax_threshold), nullptr);
    EXPECT_NE(sweep_to_csv(r).find("failed"), std::string::npos);
    EXPECT_THROW(threshold_curve(r, Method::openmax_threshold, 2, 10), ComputeError);
}

TEST(ThresholdCurve, FiltersRows) {
    const auto& b = bench();
    auto s = small_spec();
    s.epsilons = default_epsilons();
    const auto r = sweep(b.data.labels, b.train, b.train_preds, b.test, s);
    const auto curve = threshold_curve(r, Method::openmax_threshold, 3, 20);
    ASSERT_EQ(curve.size(), s.epsilons.size());
    std::size_t i = 0;
    for (const auto& row : r.rows) {
        if (row.method != Method::openmax_threshold || row.alpha != 3 || row.tail != 20)
            continue;
        EXPECT_EQ(curve[i].epsilon, row.epsilon);
        EXPECT_EQ(curve[i].accuracy, *row.accuracy);
        EXPECT_GE(curve[i].accuracy, 0.0);
        EXPECT_LE(curve[i].accuracy, 1.0);
        if (i)
            EXPECT_LT(curve[i - 1].epsilon, curve[i].epsilon);
        ++i;
    }
    EXPECT_EQ(threshold_curve(r, Method::softmax_threshold).size(), s.epsilons.size());
    EXPECT_THROW(threshold_curve(r, Method::openmax_threshold, 1, 20), ValidationError);
}

TEST(SweepCsv, Format) {
    SweepResult r;
    r.rows.push_back({Method::softmax_threshold, 0, 0, 0.05, 0.5, {}});
    r.rows.push_back({Method::openmax_threshold, 2, 20, 0.1, 0.75, {}});
    r.rows.push_back({Method::openmax_threshold, 3, 20, 0.1, std::nullopt, "boom"});
    EXPECT_EQ(sweep_to_csv(r), "method,alpha,tail,epsilon,accuracy,status\n"
                               "softmax-threshold,,,0.05,0.5,ok\n"
                               "openmax-threshold,2,20,0.1,0.75,ok\n"
                               "openmax-threshold,3,20,0.1,,failed\n");
}
