#pragma once
// Confusion matrices, open/closed-set accuracy and per-class precision/recall.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"
#include "osr/prediction.hpp"

namespace osr {

// (N+1) x (N+1) counts; rows are true classes 0..N, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes = 0)
        : n_(num_classes), counts_((num_classes + 1) * (num_classes + 1), 0) {}

    std::size_t num_classes() const noexcept { return n_; }
    std::size_t dim() const noexcept { return n_ + 1; }

    std::uint64_t at(ClassIndex truth, ClassIndex predicted) const { return counts_[index(truth, predicted)]; }

    void add(ClassIndex truth, ClassIndex predicted, std::uint64_t count = 1) {
        counts_[index(truth, predicted)] += count;
    }

    std::uint64_t row_sum(ClassIndex k) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < dim(); ++p)
            s += at(k, p);
        return s;
    }

    std::uint64_t col_sum(ClassIndex k) const {
        std::uint64_t s = 0;
        for (std::size_t t = 0; t < dim(); ++t)
            s += at(t, k);
        return s;
    }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts_)
            s += c;
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t index(ClassIndex t, ClassIndex p) const {
        if (t > n_ || p > n_)
            throw ValidationError("class index out of range for confusion matrix");
        return t * dim() + p;
    }

    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix build_confusion(std::span<const ClassIndex> truths, std::span<const ClassIndex> predicted,
                                       std::size_t num_classes) {
    if (truths.size() != predicted.size())
        throw ValidationError("truths and predictions differ in length (" + std::to_string(truths.size()) + " vs " +
                              std::to_string(predicted.size()) + ")");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truths.size(); ++i)
        cm.add(truths[i], predicted[i]);
    return cm;
}

inline ConfusionMatrix build_confusion(std::span<const ClassIndex> truths, std::span<const Prediction> predictions,
                                       std::size_t num_classes) {
    std::vector<ClassIndex> predicted;
    predicted.reserve(predictions.size());
    for (const auto& p : predictions)
        predicted.push_back(p.predicted);
    return build_confusion(truths, predicted, num_classes);
}

// closed: known-class accuracy, k in 1..N. The other modes are open-set
// accuracies over k in 0..N and differ only in how predictions were made.
enum class EvalMode { closed, softmax, softmax_threshold, openmax_threshold };

inline std::string_view to_string(EvalMode m) {
    switch (m) {
    case EvalMode::closed: return "closed";
    case EvalMode::softmax: return "softmax";
    case EvalMode::softmax_threshold: return "softmax-threshold";
    case EvalMode::openmax_threshold: return "openmax-threshold";
    }
    return "?";
}

// sum_k TP_k / sum_k (TP_k + FN_k) over the mode's class range.
inline double accuracy(const ConfusionMatrix& cm, EvalMode mode) {
    const ClassIndex first = mode == EvalMode::closed ? 1 : 0;
    std::uint64_t hits = 0, support = 0;
    for (ClassIndex k = first; k <= cm.num_classes(); ++k) {
        hits += cm.at(k, k);
        support += cm.row_sum(k);
    }
    if (support == 0)
        throw ValidationError("accuracy of an empty confusion matrix is undefined");
    return static_cast<double>(hits) / static_cast<double>(support);
}

struct ClassScores {
    std::optional<double> precision; // nullopt when nothing was predicted as this class
    std::optional<double> recall;    // nullopt when the class has no samples
    std::uint64_t support = 0;
};

inline std::vector<ClassScores> precision_recall(const ConfusionMatrix& cm) {
    std::vector<ClassScores> out(cm.dim());
    for (ClassIndex k = 0; k < cm.dim(); ++k) {
        const auto tp = static_cast<double>(cm.at(k, k));
        const auto row = cm.row_sum(k);
        const auto col = cm.col_sum(k);
        out[k].support = row;
        if (col > 0)
            out[k].precision = tp / static_cast<double>(col);
        if (row > 0)
            out[k].recall = tp / static_cast<double>(row);
    }
    return out;
}

struct EvalReport {
    EvalMode mode = EvalMode::closed;
    double accuracy = 0.0;
    std::vector<ClassScores> per_class; // index 0..N
    ConfusionMatrix confusion;
};

inline EvalReport make_report(ConfusionMatrix cm, EvalMode mode) {
    EvalReport r;
    r.mode = mode;
    r.accuracy = accuracy(cm, mode);
    r.per_class = precision_recall(cm);
    r.confusion = std::move(cm);
    return r;
}

// Rendering.

inline std::string format_fixed(double x, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

// Undefined ratios render as 0.000.
inline std::string format_ratio(const std::optional<double>& x) { return format_fixed(x.value_or(0.0)); }

inline std::string confusion_to_csv(const ConfusionMatrix& cm, const LabelMap& labels) {
    std::ostringstream os;
    os << "true\\predicted";
    for (ClassIndex p = 0; p < cm.dim(); ++p)
        os << ',' << labels.name(p);
    os << '\n';
    for (ClassIndex t = 0; t < cm.dim(); ++t) {
        os << labels.name(t);
        for (ClassIndex p = 0; p < cm.dim(); ++p)
            os << ',' << cm.at(t, p);
        os << '\n';
    }
    return os.str();
}

inline std::string pad_right(std::string s, std::size_t width) {
    if (s.size() < width)
        s.append(width - s.size(), ' ');
    return s;
}

inline std::string pad_left(std::string s, std::size_t width) {
    if (s.size() < width)
        s.insert(0, width - s.size(), ' ');
    return s;
}

// Per-class table: genre, support, precision, recall.
inline std::string render_class_table(const EvalReport& r, const LabelMap& labels) {
    std::size_t w = 5;
    for (ClassIndex k = 0; k < r.per_class.size(); ++k)
        w = std::max(w, labels.name(k).size());
    std::ostringstream os;
    os << pad_right("Genre", w) << "  " << pad_left("Support", 7) << "  " << pad_left("Precision", 9) << "  "
       << pad_left("Recall", 7) << '\n';
    for (ClassIndex k = 0; k < r.per_class.size(); ++k) {
        const auto& c = r.per_class[k];
        os << pad_right(labels.name(k), w) << "  " << pad_left(std::to_string(c.support), 7) << "  "
           << pad_left(format_ratio(c.precision), 9) << "  " << pad_left(format_ratio(c.recall), 7) << '\n';
    }
    return os.str();
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r, const LabelMap& labels) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(to_string(r.mode));
    j["accuracy"] = r.accuracy;
    auto& pc = j["per_class"] = nlohmann::ordered_json::array();
    for (ClassIndex k = 0; k < r.per_class.size(); ++k) {
        nlohmann::ordered_json c;
        c["class"] = labels.name(k);
        c["support"] = r.per_class[k].support;
        c["precision"] = r.per_class[k].precision ? nlohmann::ordered_json(*r.per_class[k].precision) : nullptr;
        c["recall"] = r.per_class[k].recall ? nlohmann::ordered_json(*r.per_class[k].recall) : nullptr;
        pc.push_back(std::move(c));
    }
    auto& cm = j["confusion"] = nlohmann::ordered_json::array();
    for (ClassIndex t = 0; t < r.confusion.dim(); ++t) {
        std::vector<std::uint64_t> row;
        for (ClassIndex p = 0; p < r.confusion.dim(); ++p)
            row.push_back(r.confusion.at(t, p));
        cm.push_back(row);
    }
    return j;
}

} // namespace osr
