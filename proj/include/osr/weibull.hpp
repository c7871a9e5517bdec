#pragma once
// Weibull tail models fitted by maximum likelihood to the largest distances
// of a class, in the manner of libMR's FitHigh.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osr/error.hpp"

namespace osr {

// How the Weibull location is chosen.
//   zero:  tau = 0, the distances are fitted as they are.
//   shift: tau = 0.99 * min(tail), the two-parameter fit runs on d - tau.
enum class TauMode { zero, shift };

inline std::string_view to_string(TauMode m) { return m == TauMode::zero ? "zero" : "shift"; }

inline std::optional<TauMode> parse_tau_mode(std::string_view s) {
    if (s == "zero") return TauMode::zero;
    if (s == "shift") return TauMode::shift;
    return std::nullopt;
}

struct WeibullModel {
    double tau = 0.0;
    double lambda = 1.0;
    double kappa = 1.0;
    std::size_t tail_size = 0;
    std::size_t n_fit = 0;
    TauMode tau_mode = TauMode::zero;

    friend bool operator==(const WeibullModel&, const WeibullModel&) = default;
};

inline void validate(const WeibullModel& m) {
    if (!(std::isfinite(m.tau) && m.tau >= 0.0))
        throw ValidationError("weibull location must be finite and >= 0");
    if (!(std::isfinite(m.lambda) && m.lambda > 0.0))
        throw ValidationError("weibull scale must be finite and > 0");
    if (!(std::isfinite(m.kappa) && m.kappa > 0.0))
        throw ValidationError("weibull shape must be finite and > 0");
}

// exp(-((d - tau) / lambda)^kappa); 1 for d <= tau.
inline double survival(const WeibullModel& m, double d) noexcept {
    if (!(d > m.tau))
        return 1.0;
    return std::exp(-std::pow((d - m.tau) / m.lambda, m.kappa));
}

inline double cdf(const WeibullModel& m, double d) noexcept {
    if (!(d > m.tau))
        return 0.0;
    return -std::expm1(-std::pow((d - m.tau) / m.lambda, m.kappa));
}

// Log of the density at d > tau.
inline double log_density(const WeibullModel& m, double d) {
    if (!(d > m.tau))
        throw ValidationError("weibull log-density requires d > tau");
    const double z = (d - m.tau) / m.lambda;
    return std::log(m.kappa) - m.kappa * std::log(m.lambda) + (m.kappa - 1.0) * std::log(d - m.tau) -
           std::pow(z, m.kappa);
}

inline double log_likelihood(const WeibullModel& m, std::span<const double> data) {
    double total = 0.0;
    for (double d : data)
        total += log_density(m, d);
    return total;
}

enum class FitFailure { too_few_points, degenerate, no_convergence };

class FitError : public ComputeError {
public:
    FitError(FitFailure reason, const std::string& what) : ComputeError(what), reason_(reason) {}
    FitFailure reason() const noexcept { return reason_; }

private:
    FitFailure reason_;
};

// The `count` largest strictly positive distances, descending. Equal values
// keep their input order, so the selection is deterministic under ties.
inline std::vector<double> select_tail(std::span<const double> distances, std::size_t count) {
    std::vector<std::size_t> idx;
    idx.reserve(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i)
        if (distances[i] > 0.0)
            idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] > distances[b]; });
    idx.resize(std::min(count, idx.size()));
    std::vector<double> tail;
    tail.reserve(idx.size());
    for (auto i : idx)
        tail.push_back(distances[i]);
    return tail;
}

struct ShapeSolverOptions {
    double lower = 1e-3;
    double upper = 1e3;
    double tolerance = 1e-10;
    int max_iterations = 200;
    double initial = 1.0;
};

struct ShapeSolution {
    double kappa = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

// Profile score for the Weibull shape on data normalised to (0, 1]:
//   g(k) = sum y^k ln y / sum y^k - 1/k - mean(ln y)
// and its derivative (weighted variance of ln y plus 1/k^2, always > 0).
struct ShapeProfile {
    std::span<const double> log_y;
    double mean_log = 0.0;

    void eval(double k, double& g, double& dg) const {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (double l : log_y) {
            const double w = std::exp(k * l);
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        const double m1 = s1 / s0;
        g = m1 - 1.0 / k - mean_log;
        dg = std::max(s2 / s0 - m1 * m1, 0.0) + 1.0 / (k * k);
    }
};

} // namespace detail

// Solves the Weibull shape likelihood equation on log(d / max d) by Newton's
// method, falling back to bisection whenever a step leaves the bracket.
inline ShapeSolution solve_shape(std::span<const double> log_y, const ShapeSolverOptions& opt = {}) {
    detail::ShapeProfile p{log_y, 0.0};
    p.mean_log = std::accumulate(log_y.begin(), log_y.end(), 0.0) / static_cast<double>(log_y.size());

    double lo = opt.lower, hi = opt.upper, g = 0.0, dg = 0.0;
    p.eval(hi, g, dg);
    if (g < 0.0)
        throw FitError(FitFailure::degenerate, "weibull shape exceeds " + std::to_string(opt.upper) +
                                                   " (tail values nearly identical)");
    double k = std::clamp(opt.initial, lo, hi);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        p.eval(k, g, dg);
        if (std::abs(g) < opt.tolerance)
            return {k, g, it};
        if (g < 0.0)
            lo = k;
        else
            hi = k;
        double next = k - g / dg;
        if (!std::isfinite(next) || next <= lo || next >= hi)
            next = 0.5 * (lo + hi);
        if (next == k)
            break;
        k = next;
    }
    throw FitError(FitFailure::no_convergence,
                   "weibull shape solver did not converge within " + std::to_string(opt.max_iterations) +
                       " iterations (last residual " + std::to_string(g) + ")");
}

// Fits a Weibull to the min(tail_size, #positive) largest distances.
inline WeibullModel fit_tail(std::span<const double> distances, std::size_t tail_size,
                             TauMode mode = TauMode::zero, const ShapeSolverOptions& opt = {}) {
    if (tail_size < 2)
        throw ValidationError("tail size must be >= 2, got " + std::to_string(tail_size));
    for (double d : distances)
        if (!std::isfinite(d) || d < 0.0)
            throw ValidationError("distances must be finite and non-negative");

    std::vector<double> tail = select_tail(distances, tail_size);
    if (tail.size() < 2)
        throw FitError(FitFailure::too_few_points,
                       "need at least 2 positive distances to fit a tail, got " + std::to_string(tail.size()));
    const double top = tail.front();
    const double bottom = tail.back();
    if (top == bottom)
        throw FitError(FitFailure::degenerate, "all tail distances are identical; weibull fit is undefined");

    WeibullModel m;
    m.tail_size = tail_size;
    m.n_fit = tail.size();
    m.tau_mode = mode;
    m.tau = mode == TauMode::shift ? 0.99 * bottom : 0.0;

    // Work on y = (d - tau) / max(d - tau) in (0, 1] so y^k never overflows.
    const double scale = top - m.tau;
    std::vector<double> log_y(tail.size());
    for (std::size_t i = 0; i < tail.size(); ++i)
        log_y[i] = std::log((tail[i] - m.tau) / scale);

    const ShapeSolution sol = solve_shape(log_y, opt);
    m.kappa = sol.kappa;
    double s0 = 0.0;
    for (double l : log_y)
        s0 += std::exp(m.kappa * l);
    m.lambda = scale * std::pow(s0 / static_cast<double>(log_y.size()), 1.0 / m.kappa);
    validate(m);
    return m;
}

} // namespace osr
