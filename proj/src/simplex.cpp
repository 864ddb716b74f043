#include "procal/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace procal {

double clamped_log(double p) {
    return std::log(std::clamp(p, kLogClampEps, 1.0));
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw DimensionMismatchError("softmax of an empty vector");
    double max = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        if (!std::isfinite(z)) throw NonFiniteError("softmax input");
        max = std::max(max, z);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace detail {

void normalize_probabilities(std::span<double> v) {
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw NonFiniteError("probability vector");
        if (v[i] < 0.0) throw NegativeEntryError(i, v[i]);
        sum += v[i];
    }
    if (sum <= 0.0) throw ZeroSumError();
    const double ulp_slack =
        16.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(v.size());
    if (std::abs(sum - 1.0) <= ulp_slack) return;
    for (double& x : v) x /= sum;
}

}  // namespace detail

ProbVector::ProbVector(std::vector<double> values) : v_(std::move(values)) {
    if (v_.size() < 2) throw DimensionMismatchError("a probability vector needs k >= 2 entries");
    detail::normalize_probabilities(v_);
}

ProbVector make_prob_vector(std::span<const double> raw) {
    return ProbVector(std::vector<double>(raw.begin(), raw.end()));
}

ProbVector make_prob_vector(std::initializer_list<double> raw) {
    return ProbVector(std::vector<double>(raw));
}

ProbVector softmax_extended(std::span<const double> activations) {
    if (activations.empty()) throw DimensionMismatchError("softmax_extended needs d >= 1");
    std::vector<double> logits(activations.begin(), activations.end());
    logits.push_back(0.0);
    return ProbVector(softmax(logits));
}

ProbVector softmax_extended(std::initializer_list<double> activations) {
    return softmax_extended(std::span<const double>(activations.begin(), activations.size()));
}

std::vector<double> softmax_extended_inverse(std::span<const double> probs) {
    if (probs.size() < 2) throw DimensionMismatchError("inverse needs at least 2 probabilities");
    const double last = probs.back();
    std::vector<double> logits(probs.size() - 1);
    for (std::size_t i = 0; i + 1 < probs.size(); ++i)
        logits[i] = std::log(probs[i]) - std::log(last);
    return logits;
}

}  // namespace procal
