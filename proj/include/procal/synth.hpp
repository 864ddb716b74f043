#pragma once

#include <cstdint>
#include <vector>

#include "procal/bregman.hpp"
#include "procal/dataset.hpp"
#include "procal/simplex.hpp"

namespace procal {

// Synthetic miscalibrated classifier: uniform simplex points are sharpened by
// t1, labels are drawn from the sharpened probabilities (a perfectly
// calibrated classifier), and the published predictions are additionally
// sharpened by t2. Because the t2 map is injective, the pre-t2 probabilities
// equal E[Y | prediction] exactly, so the true calibration error is known.
struct SynthConfig {
    std::size_t n = 0;
    int k = 2;
    double t1 = 0.9;
    double t2 = 0.6;
    std::uint64_t seed = 0;
};

struct SynthSample {
    ProbVector truth;       // exact E[Y | prediction]
    ProbVector prediction;  // temp_map(truth, t2)
    int label = 0;          // drawn from truth
};

// Temperature scaling of probabilities: p_i^(1/t) renormalized, evaluated in
// log space. t = 1 is the identity; zero entries stay zero.
std::vector<double> temp_map(std::span<const double> p, double t);

std::vector<SynthSample> generate(const SynthConfig& config);

LabeledPredictions to_labeled_predictions(std::span<const SynthSample> samples);
Matrix truth_matrix(std::span<const SynthSample> samples);

struct OracleEstimate {
    double value = 0.0;
    double std_error = 0.0;  // standard error of the Monte-Carlo mean
    double std_dev = 0.0;    // standard deviation of single draws
    std::size_t draws = 0;
};

// Fresh Monte-Carlo estimate of E[D_F(truth, prediction)] under the config's
// sampling law, independent of any evaluation sample.
OracleEstimate ground_truth_ce(const SynthConfig& config, const ConvexGenerator& f,
                               std::size_t monte_carlo_n, std::uint64_t oracle_seed);

}  // namespace procal
