#pragma once
// Softmax with a rejection threshold: the baseline open-set decision rule.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "osr/prediction.hpp"

namespace osr {

struct SoftmaxDecisionConfig {
    double epsilon = 0.0;
};

// Max-shifted softmax.
inline std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> p(v.begin(), v.end());
    if (p.empty())
        return p;
    const double shift = *std::max_element(p.begin(), p.end());
    double total = 0.0;
    for (double& x : p) {
        x = std::exp(x - shift);
        total += x;
    }
    for (double& x : p)
        x /= total;
    return p;
}

// Probabilities are reported as (0, softmax(v)) so they share the 0..N layout
// of OpenMax predictions.
inline Prediction softmax_predict(std::span<const double> v, const SoftmaxDecisionConfig& config,
                                  std::string sample_id = {}) {
    validate_epsilon(config.epsilon);
    for (double x : v)
        if (!std::isfinite(x))
            throw ValidationError("activation vector contains a non-finite value");
    const auto p = softmax(v);
    std::vector<double> probs(p.size() + 1, 0.0);
    std::copy(p.begin(), p.end(), probs.begin() + 1);
    return decide(std::move(probs), config.epsilon, std::move(sample_id));
}

} // namespace osr
