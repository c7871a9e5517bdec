#pragma once
// OpenMax: mean activation vectors, per-class Weibull calibration of MAV
// distances, and the recalibrated N+1-way probability with rejection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"
#include "osr/prediction.hpp"
#include "osr/weibull.hpp"

namespace osr {

// Which Weibull function scales the revision of the top classes.
//   cdf:           w = 1 - (alpha - i)/alpha * CDF(d); far inputs lose more mass.
//   paper_literal: w = 1 - (alpha - i)/alpha * exp(-((d - tau)/lambda)^kappa).
enum class WeightForm { cdf, paper_literal };

inline std::string_view to_string(WeightForm f) { return f == WeightForm::cdf ? "cdf" : "paper-literal"; }

inline std::optional<WeightForm> parse_weight_form(std::string_view s) {
    if (s == "cdf") return WeightForm::cdf;
    if (s == "paper-literal") return WeightForm::paper_literal;
    return std::nullopt;
}

enum class Distance { euclidean };

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

struct MavSet {
    std::vector<std::vector<double>> means; // means[j - 1] is the MAV of class j
    std::vector<std::size_t> counts;        // correctly classified samples behind each mean
};

class OpenMaxModel {
public:
    OpenMaxModel(LabelMap labels, MavSet mavs, std::vector<WeibullModel> weibulls, std::size_t alpha,
                 std::size_t tail_size, WeightForm weight_form = WeightForm::cdf)
        : labels_(std::move(labels)), mavs_(std::move(mavs)), weibulls_(std::move(weibulls)), alpha_(alpha),
          tail_size_(tail_size), weight_form_(weight_form) {
        const std::size_t n = labels_.size();
        if (alpha_ < 1 || alpha_ > n)
            throw ValidationError("alpha must lie in [1, " + std::to_string(n) + "], got " + std::to_string(alpha_));
        if (mavs_.means.size() != n || mavs_.counts.size() != n)
            throw ValidationError("model needs exactly one MAV per class");
        if (weibulls_.size() != n)
            throw ValidationError("model needs exactly one weibull per class");
        for (std::size_t j = 0; j < n; ++j) {
            if (mavs_.means[j].size() != n)
                throw ValidationError("MAV of class '" + labels_.names()[j] + "' has wrong length");
            for (double x : mavs_.means[j])
                if (!std::isfinite(x))
                    throw ValidationError("MAV of class '" + labels_.names()[j] + "' is not finite");
            if (mavs_.counts[j] < 1)
                throw ValidationError("MAV of class '" + labels_.names()[j] + "' has no samples");
            validate(weibulls_[j]);
        }
    }

    std::size_t num_classes() const noexcept { return labels_.size(); }
    const LabelMap& labels() const noexcept { return labels_; }
    const MavSet& mavs() const noexcept { return mavs_; }
    const std::vector<WeibullModel>& weibulls() const noexcept { return weibulls_; }
    std::size_t alpha() const noexcept { return alpha_; }
    std::size_t tail_size() const noexcept { return tail_size_; }
    WeightForm weight_form() const noexcept { return weight_form_; }
    Distance distance() const noexcept { return Distance::euclidean; }

    // Same calibration, different revision depth or weight form.
    OpenMaxModel with(std::size_t alpha, WeightForm form) const {
        return OpenMaxModel(labels_, mavs_, weibulls_, alpha, tail_size_, form);
    }

private:
    LabelMap labels_;
    MavSet mavs_;
    std::vector<WeibullModel> weibulls_;
    std::size_t alpha_;
    std::size_t tail_size_;
    WeightForm weight_form_;
};

namespace detail {

inline void check_calibration_inputs(const LabelMap& labels, std::span<const EmbeddingRecord> train,
                                     std::span<const ClassIndex> predictions) {
    if (train.size() != predictions.size())
        throw ValidationError("need one closed-set prediction per training record (" +
                              std::to_string(train.size()) + " records, " + std::to_string(predictions.size()) +
                              " predictions)");
    for (const auto& r : train) {
        validate_record(r, labels, "");
        if (r.true_label == kUnknown)
            throw ValidationError("training record '" + r.sample_id + "' is labeled unknown");
    }
}

} // namespace detail

// Mean activation vector per class over training samples whose closed-set
// prediction equals their label.
inline MavSet compute_mavs(const LabelMap& labels, std::span<const EmbeddingRecord> train,
                           std::span<const ClassIndex> predictions) {
    detail::check_calibration_inputs(labels, train, predictions);
    const std::size_t n = labels.size();
    MavSet m;
    m.means.assign(n, std::vector<double>(n, 0.0));
    m.counts.assign(n, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const ClassIndex k = train[i].true_label;
        if (predictions[i] != k)
            continue;
        auto& mean = m.means[k - 1];
        for (std::size_t d = 0; d < n; ++d)
            mean[d] += train[i].activations[d];
        ++m.counts[k - 1];
    }
    std::vector<std::string> empty;
    for (std::size_t j = 0; j < n; ++j) {
        if (m.counts[j] == 0) {
            empty.push_back(labels.names()[j]);
            continue;
        }
        for (double& x : m.means[j])
            x /= static_cast<double>(m.counts[j]);
    }
    if (!empty.empty()) {
        std::string msg = "no correctly classified training samples for class";
        msg += empty.size() > 1 ? "es" : "";
        for (std::size_t i = 0; i < empty.size(); ++i)
            msg += (i ? ", '" : " '") + empty[i] + "'";
        throw ComputeError(msg);
    }
    return m;
}

// Distances from each correctly classified training sample to its class MAV,
// grouped by class (index j - 1), in record order.
inline std::vector<std::vector<double>> class_distances(const MavSet& mavs, std::span<const EmbeddingRecord> train,
                                                        std::span<const ClassIndex> predictions) {
    std::vector<std::vector<double>> out(mavs.means.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const ClassIndex k = train[i].true_label;
        if (k == kUnknown || predictions[i] != k)
            continue;
        out[k - 1].push_back(euclidean(train[i].activations, mavs.means[k - 1]));
    }
    return out;
}

struct CalibrationParams {
    std::size_t alpha = 1;
    std::size_t tail_size = 20;
    WeightForm weight_form = WeightForm::cdf;
    TauMode tau_mode = TauMode::zero;
};

inline OpenMaxModel calibrate(const LabelMap& labels, std::span<const EmbeddingRecord> train,
                              std::span<const ClassIndex> predictions, const CalibrationParams& params) {
    if (params.alpha < 1 || params.alpha > labels.size())
        throw ValidationError("alpha must lie in [1, " + std::to_string(labels.size()) + "], got " +
                              std::to_string(params.alpha));
    if (params.tail_size < 2)
        throw ValidationError("tail size must be >= 2, got " + std::to_string(params.tail_size));
    MavSet mavs = compute_mavs(labels, train, predictions);
    const auto dists = class_distances(mavs, train, predictions);
    std::vector<WeibullModel> weibulls;
    weibulls.reserve(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) {
        try {
            weibulls.push_back(fit_tail(dists[j], params.tail_size, params.tau_mode));
        } catch (const FitError& e) {
            throw FitError(e.reason(), "class '" + labels.names()[j] + "': " + e.what());
        }
    }
    return OpenMaxModel(labels, std::move(mavs), std::move(weibulls), params.alpha, params.tail_size,
                        params.weight_form);
}

struct OpenMaxScore {
    std::vector<double> weights;       // w_j, index j - 1
    std::vector<double> revised;       // revised logits, index 0..N (0 = unknown)
    std::vector<double> probabilities; // index 0..N
};

// Descending order of activations; equal activations keep ascending class order.
inline std::vector<std::size_t> rank_descending(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return order;
}

inline OpenMaxScore openmax_score(const OpenMaxModel& model, std::span<const double> v) {
    const std::size_t n = model.num_classes();
    if (v.size() != n)
        throw ValidationError("activation vector has length " + std::to_string(v.size()) + ", model expects " +
                              std::to_string(n));
    for (double x : v)
        if (!std::isfinite(x))
            throw ValidationError("activation vector contains a non-finite value");

    OpenMaxScore s;
    s.weights.assign(n, 1.0);
    const auto order = rank_descending(v);
    const double alpha = static_cast<double>(model.alpha());
    for (std::size_t rank = 1; rank <= model.alpha(); ++rank) {
        const std::size_t j = order[rank - 1];
        const auto& wb = model.weibulls()[j];
        const double d = euclidean(v, model.mavs().means[j]);
        const double tail = model.weight_form() == WeightForm::cdf ? cdf(wb, d) : survival(wb, d);
        s.weights[j] = 1.0 - (alpha - static_cast<double>(rank)) / alpha * tail;
    }

    s.revised.assign(n + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        s.revised[j + 1] = v[j] * s.weights[j];
        s.revised[0] += v[j] * (1.0 - s.weights[j]);
    }

    const double shift = *std::max_element(s.revised.begin(), s.revised.end());
    s.probabilities.resize(n + 1);
    double total = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        s.probabilities[j] = std::exp(s.revised[j] - shift);
        total += s.probabilities[j];
    }
    for (double& p : s.probabilities)
        p /= total;
    return s;
}

inline Prediction openmax_predict(const OpenMaxModel& model, std::span<const double> v, double epsilon,
                                  std::string sample_id = {}) {
    validate_epsilon(epsilon);
    return decide(openmax_score(model, v).probabilities, epsilon, std::move(sample_id));
}

} // namespace osr
