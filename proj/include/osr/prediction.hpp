#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"

namespace osr {

struct Prediction {
    std::string sample_id;
    std::vector<double> probabilities; // indices 0..N, 0 = unknown
    ClassIndex predicted = kUnknown;
    bool rejected = true;
};

inline void validate_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw ValidationError("rejection threshold must lie in [0, 1], got " + std::to_string(epsilon));
}

// y* = argmax over 0..N (ties to the smallest index); rejected when y* is the
// unknown class or its probability is strictly below epsilon.
inline Prediction decide(std::vector<double> probabilities, double epsilon, std::string sample_id = {}) {
    Prediction p;
    p.sample_id = std::move(sample_id);
    std::size_t best = 0;
    for (std::size_t j = 1; j < probabilities.size(); ++j)
        if (probabilities[j] > probabilities[best])
            best = j;
    p.rejected = best == kUnknown || probabilities[best] < epsilon;
    p.predicted = p.rejected ? kUnknown : best;
    p.probabilities = std::move(probabilities);
    return p;
}

} // namespace osr
