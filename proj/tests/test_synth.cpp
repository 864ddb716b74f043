#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "procal/synth.hpp"
#include "testutil.hpp"

using namespace procal;

TEST_CASE("temp_map basics") {
    const std::vector<double> p{0.75, 0.25};
    const auto identity = temp_map(p, 1.0);
    CHECK(identity[0] == 0.75);
    CHECK(identity[1] == 0.25);

    const auto sym = temp_map(std::vector<double>{0.5, 0.5}, 0.37);
    CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-15));

    const auto sharp = temp_map(p, 0.5);
    CHECK(sharp[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(sharp[1] == doctest::Approx(0.1).epsilon(1e-12));

    const auto with_zero = temp_map(std::vector<double>{0.0, 0.3, 0.7}, 0.5);
    CHECK(with_zero[0] == 0.0);

    CHECK_THROWS_AS(temp_map(p, 0.0), InputError);
}

TEST_CASE("generation is deterministic per seed") {
    const SynthConfig config{50, 3, 0.9, 0.6, 424242};
    const auto a = generate(config);
    const auto b = generate(config);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(a[i].truth[c] == b[i].truth[c]);
            CHECK(a[i].prediction[c] == b[i].prediction[c]);
        }
    }
    const auto other = generate({50, 3, 0.9, 0.6, 424243});
    bool any_different = false;
    for (std::size_t i = 0; i < a.size() && !any_different; ++i)
        any_different = a[i].truth[0] != other[i].truth[0];
    CHECK(any_different);
}

TEST_CASE("t2 = 1 publishes the truth unchanged") {
    const auto samples = generate({40, 4, 0.9, 1.0, 7});
    for (const auto& s : samples)
        for (std::size_t c = 0; c < 4; ++c) CHECK(s.prediction[c] == s.truth[c]);
}

TEST_CASE("class frequencies are symmetric under uniform sampling") {
    const int k = 5;
    const std::size_t n = 100000;
    const auto samples = generate({n, k, 0.9, 0.6, 99});
    std::vector<double> freq(k, 0.0);
    for (const auto& s : samples) freq[static_cast<std::size_t>(s.label)] += 1.0;
    // Bernoulli standard error per class.
    const double expected = 1.0 / k;
    const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
    for (int c = 0; c < k; ++c)
        CHECK(std::abs(freq[static_cast<std::size_t>(c)] / static_cast<double>(n) - expected) <=
              3.0 * se);
}

TEST_CASE("the miscalibration map is injective on the generated points") {
    auto samples = generate({5000, 3, 0.9, 0.6, 5});
    std::sort(samples.begin(), samples.end(), [](const SynthSample& a, const SynthSample& b) {
        return a.prediction[0] < b.prediction[0];
    });
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const bool same_pred = samples[i].prediction[0] == samples[i + 1].prediction[0] &&
                               samples[i].prediction[1] == samples[i + 1].prediction[1];
        if (same_pred) {
            CHECK(samples[i].truth[0] == samples[i + 1].truth[0]);
            CHECK(samples[i].truth[1] == samples[i + 1].truth[1]);
        }
    }
    // Distinct truths map to distinct predictions.
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
        if (samples[i].truth[0] != samples[i + 1].truth[0])
            CHECK(samples[i].prediction[0] != samples[i + 1].prediction[0]);
}

TEST_CASE("labels are conditionally unbiased given the truth") {
    const std::size_t n = 100000;
    const auto samples = generate({n, 2, 0.9, 0.6, 17});
    // Bin the truth's first coordinate and compare label frequency per bin.
    const int bins = 10;
    std::vector<double> truth_sum(bins, 0.0);
    std::vector<double> label_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (const auto& s : samples) {
        const int b = std::min(static_cast<int>(s.truth[0] * bins), bins - 1);
        truth_sum[static_cast<std::size_t>(b)] += s.truth[0];
        label_sum[static_cast<std::size_t>(b)] += s.label == 0 ? 1.0 : 0.0;
        ++count[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
        const auto c = count[static_cast<std::size_t>(b)];
        if (c < 500) continue;
        const double mean_truth = truth_sum[static_cast<std::size_t>(b)] / static_cast<double>(c);
        const double mean_label = label_sum[static_cast<std::size_t>(b)] / static_cast<double>(c);
        const double se = std::sqrt(mean_truth * (1.0 - mean_truth) / static_cast<double>(c));
        CHECK(std::abs(mean_label - mean_truth) <= 4.0 * se + 1e-3);
    }
}

TEST_CASE("oracle is exactly zero when no miscalibration is applied") {
    for (const auto& gen : {generators::neg_entropy(), generators::squared_norm()}) {
        const auto est = ground_truth_ce({1, 3, 0.9, 1.0, 0}, gen, 10000, 3);
        CHECK(est.value == 0.0);
    }
}

TEST_CASE("oracle estimates agree across seeds within Monte-Carlo error") {
    const auto& gen = generators::neg_entropy();
    const auto a = ground_truth_ce({1, 2, 0.9, 0.6, 0}, gen, 100000, 101);
    const auto b = ground_truth_ce({1, 2, 0.9, 0.6, 0}, gen, 100000, 202);
    const double combined = std::hypot(a.std_error, b.std_error);
    CHECK(std::abs(a.value - b.value) <= 3.0 * combined);
    CHECK(a.std_error > 0.0);
    CHECK(a.std_dev == doctest::Approx(a.std_error * std::sqrt(100000.0)).epsilon(1e-12));
}

TEST_CASE("oracle with the brier generator is positive under miscalibration") {
    const auto est = ground_truth_ce({1, 2, 0.9, 0.6, 0}, generators::squared_norm(), 50000, 11);
    CHECK(est.value > 0.0);
}

TEST_CASE("synthetic samples convert to a dataset") {
    const auto samples = generate({25, 4, 0.9, 0.6, 1});
    const auto ds = to_labeled_predictions(samples);
    CHECK(ds.size() == 25);
    CHECK(ds.prediction_dim() == 4);
    const auto truth = truth_matrix(samples);
    CHECK(truth.rows() == 25);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(ds.predictions()(3, c) == samples[3].prediction[c]);
        CHECK(truth(3, c) == samples[3].truth[c]);
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(generate({0, 3, 0.9, 0.6, 0}), InputError);
    CHECK_THROWS_AS(generate({10, 1, 0.9, 0.6, 0}), InputError);
    CHECK_THROWS_AS(generate({10, 3, 0.0, 0.6, 0}), InputError);
    CHECK_THROWS_AS(generate({10, 3, 0.9, -1.0, 0}), InputError);
}
