#pragma once

#include <initializer_list>
#include <span>
#include <vector>

#include "procal/errors.hpp"

namespace procal {

// Floor applied to probabilities wherever a logarithm is taken.
inline constexpr double kLogClampEps = 1e-12;

// Accepted deviation of an externally supplied probability row from sum 1;
// rows further off are rejected rather than silently renormalized.
inline constexpr double kRowSumTolerance = 1e-6;

// log of p clamped to [kLogClampEps, 1].
double clamped_log(double p);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

namespace detail {
// Validates a raw non-negative vector and scales it to sum 1 in place.
// The division is skipped when the sum is already within a few ulp of 1,
// which keeps serialization round trips bit-exact.
void normalize_probabilities(std::span<double> v);
}  // namespace detail

// A point on the probability simplex: entries in [0, 1] summing to 1, with
// at least two coordinates. Immutable after construction.
class ProbVector {
public:
    explicit ProbVector(std::vector<double> values);

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    std::span<const double> values() const { return v_; }
    const std::vector<double>& vec() const { return v_; }

private:
    std::vector<double> v_;
};

// Normalizes arbitrary non-negative reals to a simplex point.
ProbVector make_prob_vector(std::span<const double> raw);
ProbVector make_prob_vector(std::initializer_list<double> raw);

// Softmax over the activations with one appended zero logit, a map from
// R^d into the interior of the (d+1)-simplex that is injective.
ProbVector softmax_extended(std::span<const double> activations);
ProbVector softmax_extended(std::initializer_list<double> activations);

// Inverse of softmax_extended on the interior: logit_i = log(p_i / p_last).
std::vector<double> softmax_extended_inverse(std::span<const double> probs);

}  // namespace procal
