#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace procal {

// Compensated accumulator; keeps long reductions stable under reordering of
// the surrounding loop structure.
class KahanSum {
public:
    void add(double x) {
        const double y = x - compensation_;
        const double t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

// log(sum_i exp(v_i)) with a fixed left-to-right reduction order. -inf
// entries contribute nothing; an all -inf input returns -inf.
inline double log_sum_exp(std::span<const double> v) {
    double max = -std::numeric_limits<double>::infinity();
    for (double x : v) max = std::max(max, x);
    if (!(max > -std::numeric_limits<double>::infinity())) return max;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - max);
    return max + std::log(sum);
}

}  // namespace procal
