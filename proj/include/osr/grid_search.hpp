#pragma once
// Exhaustive (alpha, tail size, epsilon) sweep for OpenMax and epsilon sweep
// for softmax with threshold. Each (alpha, tail) pair is calibrated once and
// every epsilon reuses the cached scores.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"
#include "osr/openmax.hpp"
#include "osr/softmax.hpp"

namespace osr {

enum class Method { softmax_threshold, openmax_threshold };

inline std::string_view to_string(Method m) {
    return m == Method::softmax_threshold ? "softmax-threshold" : "openmax-threshold";
}

inline std::optional<Method> parse_method(std::string_view s) {
    if (s == "softmax-threshold") return Method::softmax_threshold;
    if (s == "openmax-threshold") return Method::openmax_threshold;
    return std::nullopt;
}

struct SweepSpec {
    std::vector<std::size_t> alphas;
    std::vector<std::size_t> tails;
    std::vector<double> epsilons;
    std::vector<Method> methods;
    WeightForm weight_form = WeightForm::cdf;
    TauMode tau_mode = TauMode::zero;
};

// 0.05, 0.10, ..., 0.95
inline std::vector<double> default_epsilons() {
    std::vector<double> e;
    for (int k = 1; k <= 19; ++k)
        e.push_back(k / 20.0);
    return e;
}

// alpha in [N/2, N] (N/2 rounded up unless round_up is false), tails 20..40 step 5.
inline SweepSpec default_sweep_spec(std::size_t num_classes, bool round_up = true) {
    SweepSpec s;
    const std::size_t first = std::max<std::size_t>(1, round_up ? (num_classes + 1) / 2 : num_classes / 2);
    for (std::size_t a = first; a <= num_classes; ++a)
        s.alphas.push_back(a);
    s.tails = {20, 25, 30, 35, 40};
    s.epsilons = default_epsilons();
    s.methods = {Method::softmax_threshold, Method::openmax_threshold};
    return s;
}

inline void validate(const SweepSpec& s, std::size_t num_classes) {
    if (s.methods.empty() || s.epsilons.empty())
        throw ValidationError("sweep needs at least one method and one epsilon");
    const bool openmax =
        std::find(s.methods.begin(), s.methods.end(), Method::openmax_threshold) != s.methods.end();
    if (openmax && (s.alphas.empty() || s.tails.empty()))
        throw ValidationError("openmax sweep needs at least one alpha and one tail size");
    for (auto a : s.alphas)
        if (a < 1 || a > num_classes)
            throw ValidationError("sweep alpha " + std::to_string(a) + " outside [1, " +
                                  std::to_string(num_classes) + "]");
    for (auto t : s.tails)
        if (t < 2)
            throw ValidationError("sweep tail size " + std::to_string(t) + " is below 2");
    for (auto e : s.epsilons)
        validate_epsilon(e);
}

// alpha and tail are 0 on softmax rows.
struct SweepRow {
    Method method = Method::openmax_threshold;
    std::size_t alpha = 0;
    std::size_t tail = 0;
    double epsilon = 0.0;
    std::optional<double> accuracy; // empty when calibration failed
    std::string error;

    bool ok() const noexcept { return accuracy.has_value(); }
    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
    std::vector<SweepRow> rows;    // ordered by (method, alpha, tail, epsilon)
    std::vector<SweepRow> best;    // one per method that has a successful row
    std::size_t calibrations = 0;  // number of OpenMax calibrations performed

    const SweepRow* best_for(Method m) const {
        for (const auto& r : best)
            if (r.method == m)
                return &r;
        return nullptr;
    }
};

struct SweepOptions {
    unsigned threads = 1;
};

namespace detail {

template <class T>
std::vector<T> sorted_unique(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// Open-set accuracy of decide(probabilities, eps) against the truths.
inline double thresholded_accuracy(const std::vector<std::vector<double>>& probabilities,
                                   std::span<const ClassIndex> truths, double epsilon) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truths.size(); ++i)
        if (decide(probabilities[i], epsilon).predicted == truths[i])
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(truths.size());
}

// Strictly better: higher accuracy, then smaller epsilon, alpha, tail.
inline bool better(const SweepRow& a, const SweepRow& b) {
    if (*a.accuracy != *b.accuracy)
        return *a.accuracy > *b.accuracy;
    if (a.epsilon != b.epsilon)
        return a.epsilon < b.epsilon;
    if (a.alpha != b.alpha)
        return a.alpha < b.alpha;
    return a.tail < b.tail;
}

} // namespace detail

inline SweepResult sweep(const LabelMap& labels, std::span<const EmbeddingRecord> train,
                         std::span<const ClassIndex> train_predictions, std::span<const EmbeddingRecord> test,
                         const SweepSpec& spec_in, const SweepOptions& options = {}) {
    const std::size_t n = labels.size();
    validate(spec_in, n);
    if (test.empty())
        throw ValidationError("sweep needs a non-empty evaluation set");
    for (const auto& r : test)
        validate_record(r, labels, "");

    const auto alphas = detail::sorted_unique(spec_in.alphas);
    const auto tails = detail::sorted_unique(spec_in.tails);
    const auto epsilons = detail::sorted_unique(spec_in.epsilons);
    const auto methods = detail::sorted_unique(spec_in.methods);
    const auto truths = true_labels(test);

    SweepResult result;
    for (Method method : methods) {
        if (method == Method::softmax_threshold) {
            std::vector<std::vector<double>> probs;
            probs.reserve(test.size());
            for (const auto& r : test)
                probs.push_back(softmax_predict(r.activations, {0.0}).probabilities);
            for (double eps : epsilons)
                result.rows.push_back({method, 0, 0, eps, detail::thresholded_accuracy(probs, truths, eps), {}});
            continue;
        }

        struct Pair {
            std::size_t alpha, tail;
        };
        std::vector<Pair> pairs;
        for (auto a : alphas)
            for (auto t : tails)
                pairs.push_back({a, t});
        std::vector<std::vector<SweepRow>> slots(pairs.size());
        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> calibrations{0};

        auto work = [&] {
            for (std::size_t p = next++; p < pairs.size(); p = next++) {
                const auto [alpha, tail] = pairs[p];
                auto& rows = slots[p];
                try {
                    ++calibrations;
                    const OpenMaxModel model =
                        calibrate(labels, train, train_predictions, {alpha, tail, spec_in.weight_form, spec_in.tau_mode});
                    std::vector<std::vector<double>> probs;
                    probs.reserve(test.size());
                    for (const auto& r : test)
                        probs.push_back(openmax_score(model, r.activations).probabilities);
                    for (double eps : epsilons)
                        rows.push_back({method, alpha, tail, eps, detail::thresholded_accuracy(probs, truths, eps), {}});
                } catch (const ComputeError& e) {
                    rows.clear();
                    for (double eps : epsilons)
                        rows.push_back({method, alpha, tail, eps, std::nullopt, e.what()});
                }
            }
        };
        const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(pairs.size())));
        if (workers == 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back(work);
        }
        result.calibrations += calibrations.load();
        for (auto& rows : slots)
            for (auto& r : rows)
                result.rows.push_back(std::move(r));
    }

    for (Method method : methods) {
        const SweepRow* best = nullptr;
        for (const auto& r : result.rows)
            if (r.method == method && r.ok() && (!best || detail::better(r, *best)))
                best = &r;
        if (best)
            result.best.push_back(*best);
    }
    return result;
}

struct CurvePoint {
    double epsilon;
    double accuracy;
};

// Accuracy against epsilon for one (method, alpha, tail); alpha and tail are
// ignored for softmax.
inline std::vector<CurvePoint> threshold_curve(const SweepResult& result, Method method, std::size_t alpha = 0,
                                               std::size_t tail = 0) {
    if (method == Method::softmax_threshold)
        alpha = tail = 0;
    std::vector<CurvePoint> out;
    for (const auto& r : result.rows) {
        if (r.method != method || r.alpha != alpha || r.tail != tail)
            continue;
        if (!r.ok())
            throw ComputeError("no threshold curve for " + std::string(to_string(method)) + " alpha=" +
                               std::to_string(alpha) + " tail=" + std::to_string(tail) + ": " + r.error);
        out.push_back({r.epsilon, *r.accuracy});
    }
    if (out.empty())
        throw ValidationError("sweep has no rows for " + std::string(to_string(method)) + " alpha=" +
                              std::to_string(alpha) + " tail=" + std::to_string(tail));
    std::sort(out.begin(), out.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.epsilon < b.epsilon; });
    return out;
}

// Shortest round-trip decimal form.
inline std::string format_number(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string sweep_to_csv(const SweepResult& result) {
    std::ostringstream os;
    os << "method,alpha,tail,epsilon,accuracy,status\n";
    for (const auto& r : result.rows) {
        os << to_string(r.method) << ',';
        if (r.method == Method::openmax_threshold)
            os << r.alpha << ',' << r.tail;
        else
            os << ',';
        os << ',' << format_number(r.epsilon) << ',';
        if (r.ok())
            os << format_number(*r.accuracy);
        os << ',' << (r.ok() ? "ok" : "failed") << '\n';
    }
    return os.str();
}

inline std::string curve_to_csv(std::span<const CurvePoint> curve) {
    std::ostringstream os;
    os << "epsilon,accuracy\n";
    for (const auto& p : curve)
        os << format_number(p.epsilon) << ',' << format_number(p.accuracy) << '\n';
    return os.str();
}

inline nlohmann::ordered_json row_to_json(const SweepRow& r) {
    nlohmann::ordered_json j;
    j["method"] = std::string(to_string(r.method));
    if (r.method == Method::openmax_threshold) {
        j["alpha"] = r.alpha;
        j["tail"] = r.tail;
    }
    j["epsilon"] = r.epsilon;
    j["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nullptr;
    if (!r.ok())
        j["error"] = r.error;
    return j;
}

inline nlohmann::ordered_json best_to_json(const SweepResult& result) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : result.best)
        j.push_back(row_to_json(r));
    return j;
}

} // namespace osr
