#include "procal/synth.hpp"

#include <cmath>

#include "procal/rng.hpp"

namespace procal {

namespace {

void check_config(const SynthConfig& config) {
    if (config.n < 1) throw InputError("synthetic sample count must be >= 1");
    if (config.k < 2) throw InputError("synthetic class count must be >= 2");
    if (config.t1 <= 0.0 || config.t2 <= 0.0)
        throw InputError("synthetic temperatures must be positive");
}

std::vector<double> uniform_simplex(Rng& rng, int k) {
    std::vector<double> p(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (double& x : p) {
        x = rng.exponential();
        sum += x;
    }
    for (double& x : p) x /= sum;
    return p;
}

struct Draw {
    std::vector<double> truth;
    std::vector<double> prediction;
    int label;
};

Draw draw_one(Rng& rng, const SynthConfig& config) {
    Draw d;
    d.truth = temp_map(uniform_simplex(rng, config.k), config.t1);
    d.label = rng.categorical(d.truth);
    d.prediction = temp_map(d.truth, config.t2);
    return d;
}

}  // namespace

std::vector<double> temp_map(std::span<const double> p, double t) {
    if (t <= 0.0) throw InputError("temperature must be positive");
    std::vector<double> out(p.size(), 0.0);
    if (t == 1.0) {
        std::copy(p.begin(), p.end(), out.begin());
        return out;
    }
    double max_log = -std::numeric_limits<double>::infinity();
    for (double x : p)
        if (x > 0.0) max_log = std::max(max_log, std::log(x) / t);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            out[i] = std::exp(std::log(p[i]) / t - max_log);
            sum += out[i];
        }
    }
    for (double& x : out) x /= sum;
    return out;
}

std::vector<SynthSample> generate(const SynthConfig& config) {
    check_config(config);
    Rng rng(config.seed);
    std::vector<SynthSample> samples;
    samples.reserve(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        auto d = draw_one(rng, config);
        samples.push_back({ProbVector(std::move(d.truth)), ProbVector(std::move(d.prediction)),
                           d.label});
    }
    return samples;
}

LabeledPredictions to_labeled_predictions(std::span<const SynthSample> samples) {
    if (samples.empty()) throw InputError("no synthetic samples");
    const std::size_t k = samples.front().prediction.size();
    Matrix preds(samples.size(), k);
    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = samples[i].prediction.values();
        std::copy(row.begin(), row.end(), preds.row(i).begin());
        labels[i] = samples[i].label;
    }
    return LabeledPredictions(std::move(preds), std::move(labels));
}

Matrix truth_matrix(std::span<const SynthSample> samples) {
    if (samples.empty()) throw InputError("no synthetic samples");
    const std::size_t k = samples.front().truth.size();
    Matrix truth(samples.size(), k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = samples[i].truth.values();
        std::copy(row.begin(), row.end(), truth.row(i).begin());
    }
    return truth;
}

OracleEstimate ground_truth_ce(const SynthConfig& config, const ConvexGenerator& f,
                               std::size_t monte_carlo_n, std::uint64_t oracle_seed) {
    check_config(config);
    if (monte_carlo_n < 2) throw InputError("oracle needs at least 2 draws");
    Rng rng(oracle_seed);
    // Welford accumulation of mean and variance of D_F(truth, prediction).
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < monte_carlo_n; ++i) {
        const auto d = draw_one(rng, config);
        const double v = bregman_divergence(f, d.truth, d.prediction);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double variance = m2 / static_cast<double>(monte_carlo_n - 1);
    OracleEstimate est;
    est.value = mean;
    est.std_dev = std::sqrt(variance);
    est.std_error = est.std_dev / std::sqrt(static_cast<double>(monte_carlo_n));
    est.draws = monte_carlo_n;
    return est;
}

}  // namespace procal
