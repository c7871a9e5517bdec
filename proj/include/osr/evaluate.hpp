#pragma once
// Batch prediction and the four accuracy modes reported per experiment:
// closed-set, plain softmax, softmax with threshold, OpenMax with threshold.

#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osr/embedding_data.hpp"
#include "osr/metrics.hpp"
#include "osr/openmax.hpp"
#include "osr/softmax.hpp"

namespace osr {

inline std::vector<Prediction> predict_softmax(std::span<const EmbeddingRecord> records, double epsilon) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(softmax_predict(r.activations, {epsilon}, r.sample_id));
    return out;
}

inline std::vector<Prediction> predict_openmax(const OpenMaxModel& model, std::span<const EmbeddingRecord> records,
                                               double epsilon) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(openmax_predict(model, r.activations, epsilon, r.sample_id));
    return out;
}

inline EvalReport evaluate_predictions(std::span<const EmbeddingRecord> records,
                                       std::span<const Prediction> predictions, std::size_t num_classes,
                                       EvalMode mode) {
    return make_report(build_confusion(true_labels(records), predictions, num_classes), mode);
}

inline EvalReport evaluate_softmax(std::span<const EmbeddingRecord> records, std::size_t num_classes,
                                   double epsilon) {
    return evaluate_predictions(records, predict_softmax(records, epsilon), num_classes,
                                EvalMode::softmax_threshold);
}

inline EvalReport evaluate_openmax(const OpenMaxModel& model, std::span<const EmbeddingRecord> records,
                                   double epsilon) {
    return evaluate_predictions(records, predict_openmax(model, records, epsilon), model.num_classes(),
                                EvalMode::openmax_threshold);
}

struct EvaluationConfig {
    double softmax_epsilon = 0.5;
    double openmax_epsilon = 0.5;
};

struct Evaluation {
    EvalReport closed;            // known-class test samples, argmax decision
    EvalReport softmax;           // every test sample, argmax decision
    EvalReport softmax_threshold; // every test sample, softmax with rejection
    EvalReport openmax_threshold; // every test sample, OpenMax with rejection
    std::vector<Prediction> softmax_predictions;
    std::vector<Prediction> openmax_predictions;
};

inline Evaluation evaluate(const OpenMaxModel& model, std::span<const EmbeddingRecord> test,
                           const EvaluationConfig& config) {
    validate_epsilon(config.softmax_epsilon);
    validate_epsilon(config.openmax_epsilon);
    const std::size_t n = model.num_classes();
    for (const auto& r : test)
        validate_record(r, model.labels(), "");

    Evaluation e;
    std::vector<EmbeddingRecord> known;
    for (const auto& r : test)
        if (r.true_label != kUnknown)
            known.push_back(r);
    e.closed = make_report(build_confusion(true_labels(known), closed_set_predictions(known), n), EvalMode::closed);
    e.softmax = make_report(build_confusion(true_labels(test), closed_set_predictions(test), n), EvalMode::softmax);
    e.softmax_predictions = predict_softmax(test, config.softmax_epsilon);
    e.softmax_threshold = evaluate_predictions(test, e.softmax_predictions, n, EvalMode::softmax_threshold);
    e.openmax_predictions = predict_openmax(model, test, config.openmax_epsilon);
    e.openmax_threshold = evaluate_predictions(test, e.openmax_predictions, n, EvalMode::openmax_threshold);
    return e;
}

// One-row accuracy table: Acc_c, Acc_s, Acc_st, Acc_ot.
inline std::string render_accuracy_table(const Evaluation& e, const std::string& experiment = "1") {
    const std::size_t w = std::max<std::size_t>(10, experiment.size());
    std::ostringstream os;
    os << pad_right("Experiment", w) << "  " << pad_left("Acc_c", 6) << "  " << pad_left("Acc_s", 6) << "  "
       << pad_left("Acc_st", 6) << "  " << pad_left("Acc_ot", 6) << '\n';
    os << pad_right(experiment, w) << "  " << pad_left(format_fixed(e.closed.accuracy), 6) << "  "
       << pad_left(format_fixed(e.softmax.accuracy), 6) << "  "
       << pad_left(format_fixed(e.softmax_threshold.accuracy), 6) << "  "
       << pad_left(format_fixed(e.openmax_threshold.accuracy), 6) << '\n';
    return os.str();
}

inline nlohmann::ordered_json evaluation_to_json(const Evaluation& e, const LabelMap& labels) {
    nlohmann::ordered_json j;
    j["Acc_c"] = e.closed.accuracy;
    j["Acc_s"] = e.softmax.accuracy;
    j["Acc_st"] = e.softmax_threshold.accuracy;
    j["Acc_ot"] = e.openmax_threshold.accuracy;
    j["reports"] = {
        {"closed", report_to_json(e.closed, labels)},
        {"softmax", report_to_json(e.softmax, labels)},
        {"softmax_threshold", report_to_json(e.softmax_threshold, labels)},
        {"openmax_threshold", report_to_json(e.openmax_threshold, labels)},
    };
    return j;
}

inline nlohmann::ordered_json prediction_to_json(const Prediction& p, const LabelMap& labels) {
    nlohmann::ordered_json j;
    j["id"] = p.sample_id;
    j["predicted"] = p.predicted;
    j["label"] = labels.name(p.predicted);
    j["rejected"] = p.rejected;
    j["p"] = p.probabilities;
    return j;
}

} // namespace osr
