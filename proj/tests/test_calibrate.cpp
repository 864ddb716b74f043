#include <doctest.h>

#include <cmath>

#include "procal/calibrate.hpp"
#include "procal/simplex.hpp"
#include "testutil.hpp"

using namespace procal;

namespace {

// Calibrated logit dataset: probabilities drawn from a flat Dirichlet, labels
// from those probabilities, logits = log p divided by sharpening.
LabeledPredictions calibrated_logit_dataset(Rng& rng, std::size_t n, int k, double sharpen) {
    Matrix preds(n, static_cast<std::size_t>(k));
    Matrix logits(n, static_cast<std::size_t>(k));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = testutil::random_simplex_point(rng, k);
        labels[i] = rng.categorical(p);
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
            logits(i, c) = std::log(p[c]) / sharpen;
        const auto scaled = softmax(logits.row(i));
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) preds(i, c) = scaled[c];
    }
    return LabeledPredictions(std::move(preds), std::move(labels), 0, std::move(logits));
}

std::size_t row_argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
    return best;
}

}  // namespace

TEST_CASE("temperature apply with T=1 is the identity") {
    Rng rng(61);
    const auto ds = calibrated_logit_dataset(rng, 50, 3, 1.0);
    const auto out = temperature_apply(TemperatureModel{1.0}, ds);
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(out.predictions()(r, c) - ds.predictions()(r, c)) <= 1e-12);
}

TEST_CASE("temperature apply closed form on (2, 0) logits") {
    Matrix logits(2, 2);
    logits(0, 0) = 2.0;
    logits(0, 1) = 0.0;
    logits(1, 0) = 2.0;
    logits(1, 1) = 0.0;
    Matrix preds(2, 2);
    for (std::size_t r = 0; r < 2; ++r) {
        const auto p = softmax(logits.row(r));
        preds(r, 0) = p[0];
        preds(r, 1) = p[1];
    }
    const LabeledPredictions ds(std::move(preds), {0, 1}, 0, std::move(logits));
    const auto out = temperature_apply(TemperatureModel{2.0}, ds);
    const double e = std::exp(1.0);
    CHECK(out.predictions()(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-9));
    CHECK(out.predictions()(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-9));

    // Large T flattens monotonically toward the uniform vector.
    double prev = out.predictions()(0, 0);
    for (const double t : {4.0, 8.0, 32.0, 128.0}) {
        const double cur = temperature_apply(TemperatureModel{t}, ds).predictions()(0, 0);
        CHECK(cur < prev);
        CHECK(cur > 0.5);
        prev = cur;
    }
}

TEST_CASE("temperature apply preserves the row argmax") {
    Rng rng(62);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix logits(8, 5);
        Matrix preds(8, 5, 0.2);
        std::vector<int> labels(8, 0);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 5; ++c) logits(r, c) = rng.uniform(-8.0, 8.0);
        const LabeledPredictions ds(std::move(preds), std::move(labels), 0, std::move(logits));
        const double t = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
        const auto out = temperature_apply(TemperatureModel{t}, ds);
        for (std::size_t r = 0; r < 8; ++r)
            CHECK(row_argmax(out.predictions().row(r)) == row_argmax(ds.logits().row(r)));
    }
}

TEST_CASE("temperature fit recovers T ~ 1 on calibrated logits") {
    Rng rng(63);
    const auto ds = calibrated_logit_dataset(rng, 10000, 5, 1.0);
    const auto fit = temperature_fit(ds);
    CHECK_FALSE(fit.degenerate_labels);
    CHECK(std::abs(fit.model.temperature - 1.0) <= 0.05);
}

TEST_CASE("temperature fit recovers the over-sharpening factor") {
    Rng rng(64);
    // Logits divided by 0.6 are recalibrated by T = 1/0.6.
    const auto ds = calibrated_logit_dataset(rng, 10000, 5, 0.6);
    const auto fit = temperature_fit(ds);
    CHECK(std::abs(fit.model.temperature - 1.0 / 0.6) <= 0.08);
}

TEST_CASE("temperature fit warns on a single label class") {
    Matrix logits(4, 2);
    Matrix preds(4, 2, 0.5);
    for (std::size_t r = 0; r < 4; ++r) {
        logits(r, 0) = 1.0;
        logits(r, 1) = -1.0;
    }
    const LabeledPredictions ds(std::move(preds), {0, 0, 0, 0}, 0, std::move(logits));
    const auto fit = temperature_fit(ds);
    CHECK(fit.degenerate_labels);
    // All logits favor the observed class, so sharpening is strictly better.
    CHECK(fit.model.temperature == doctest::Approx(0.05));
}

TEST_CASE("fitting on probabilities falls back to log probabilities") {
    Rng rng(65);
    auto with_logits = calibrated_logit_dataset(rng, 4000, 3, 1.0);
    const LabeledPredictions without(
        with_logits.predictions(),
        std::vector<int>(with_logits.labels().begin(), with_logits.labels().end()));
    const auto fit = temperature_fit(without);
    CHECK(std::abs(fit.model.temperature - 1.0) <= 0.08);
}

TEST_CASE("fitting TS never increases the training NLL") {
    Rng rng(66);
    const auto ds = calibrated_logit_dataset(rng, 2000, 4, 0.7);
    const auto fit = temperature_fit(ds);
    // NLL at T = 1 (identity) vs at the fitted temperature.
    const auto identity = temperature_apply(TemperatureModel{1.0}, ds);
    double nll_before = 0.0;
    double nll_after = 0.0;
    const auto fitted = temperature_apply(fit.model, ds);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto label = static_cast<std::size_t>(ds.labels()[r]);
        nll_before -= std::log(identity.predictions()(r, label));
        nll_after -= std::log(fitted.predictions()(r, label));
    }
    CHECK(nll_after <= nll_before + 1e-9);
}

TEST_CASE("PAV leaves monotone targets untouched") {
    const std::vector<double> targets{0.0, 0.0, 1.0, 1.0};
    const std::vector<double> weights{1.0, 1.0, 1.0, 1.0};
    const auto fitted = pav_nondecreasing(targets, weights);
    for (std::size_t i = 0; i < targets.size(); ++i) CHECK(fitted[i] == targets[i]);
}

TEST_CASE("PAV pools a single violating pair") {
    const std::vector<double> targets{1.0, 0.0};
    const std::vector<double> weights{1.0, 1.0};
    const auto fitted = pav_nondecreasing(targets, weights);
    CHECK(fitted[0] == 0.5);
    CHECK(fitted[1] == 0.5);
}

namespace {

double partition_oracle_sse(const std::vector<double>& targets) {
    // Brute force over all contiguous level-set partitions with non-decreasing
    // block means.
    const std::size_t n = targets.size();
    double best = std::numeric_limits<double>::infinity();
    const unsigned long masks = 1ul << (n - 1);
    for (unsigned long mask = 0; mask < masks; ++mask) {
        double sse = 0.0;
        double prev_mean = -std::numeric_limits<double>::infinity();
        bool feasible = true;
        std::size_t start = 0;
        for (std::size_t end = 0; end < n && feasible; ++end) {
            const bool boundary = end + 1 == n || (mask >> end) & 1ul;
            if (!boundary) continue;
            double mean = 0.0;
            for (std::size_t i = start; i <= end; ++i) mean += targets[i];
            mean /= static_cast<double>(end - start + 1);
            if (mean < prev_mean) {
                feasible = false;
                break;
            }
            for (std::size_t i = start; i <= end; ++i)
                sse += (targets[i] - mean) * (targets[i] - mean);
            prev_mean = mean;
            start = end + 1;
        }
        if (feasible) best = std::min(best, sse);
    }
    return best;
}

}  // namespace

TEST_CASE("PAV attains the brute-force partition optimum") {
    Rng rng(67);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.index(7);
        std::vector<double> targets(n);
        for (double& t : targets) t = rng.index(2) ? 1.0 : 0.0;
        const std::vector<double> weights(n, 1.0);
        const auto fitted = pav_nondecreasing(targets, weights);
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += (fitted[i] - targets[i]) * (fitted[i] - targets[i]);
        CHECK(std::abs(sse - partition_oracle_sse(targets)) <= 1e-9);
        CHECK(std::is_sorted(fitted.begin(), fitted.end()));
    }
}

TEST_CASE("isotonic fit is monotone and beats the identity") {
    Rng rng(68);
    const auto ds = testutil::random_dataset(rng, 200, 3);
    const auto model = isotonic_fit(ds);
    REQUIRE(model.classes.size() == 3);
    for (std::size_t cls = 0; cls < 3; ++cls) {
        const auto& c = model.classes[cls];
        CHECK(std::is_sorted(c.values.begin(), c.values.end()));
        CHECK(std::is_sorted(c.breakpoints.begin(), c.breakpoints.end()));
        for (double v : c.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // Squared error of the fit vs of the raw scores (identity fit).
        double sse_fit = 0.0;
        double sse_id = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double target = ds.labels()[i] == static_cast<int>(cls) ? 1.0 : 0.0;
            const double score = ds.predictions()(i, cls);
            const double fit = isotonic_predict_one(c, score);
            sse_fit += (fit - target) * (fit - target);
            sse_id += (score - target) * (score - target);
        }
        CHECK(sse_fit <= sse_id + 1e-9);
    }
}

TEST_CASE("isotonic interpolation is right-continuous and clamped") {
    IsotonicClassModel cls;
    cls.breakpoints = {0.2, 0.5, 0.8};
    cls.values = {0.1, 0.4, 0.9};
    CHECK(isotonic_predict_one(cls, 0.0) == 0.1);   // clamp below
    CHECK(isotonic_predict_one(cls, 0.2) == 0.1);   // value jumps at the breakpoint
    CHECK(isotonic_predict_one(cls, 0.35) == 0.1);  // constant between breakpoints
    CHECK(isotonic_predict_one(cls, 0.5) == 0.4);
    CHECK(isotonic_predict_one(cls, 0.79) == 0.4);
    CHECK(isotonic_predict_one(cls, 0.8) == 0.9);
    CHECK(isotonic_predict_one(cls, 1.0) == 0.9);   // clamp above
}

TEST_CASE("isotonic apply renormalizes and falls back to uniform") {
    IsotonicModel model;
    model.classes.resize(2);
    model.classes[0] = {{0.5}, {0.0}};
    model.classes[1] = {{0.5}, {0.0}};
    Matrix preds(2, 2, 0.5);
    const LabeledPredictions ds(std::move(preds), {0, 1});
    const auto out = isotonic_apply(model, ds);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(out.predictions()(r, c) == 0.5);
}

TEST_CASE("isotonic ties in scores are pooled") {
    Matrix preds(4, 2);
    const double scores[] = {0.3, 0.3, 0.7, 0.7};
    for (std::size_t i = 0; i < 4; ++i) {
        preds(i, 0) = scores[i];
        preds(i, 1) = 1.0 - scores[i];
    }
    const LabeledPredictions ds(std::move(preds), {0, 1, 0, 0});
    const auto model = isotonic_fit(ds);
    // Class 0: targets at score 0.3 are {1, 0} -> pooled 0.5; at 0.7 -> {1, 1} -> 1.
    REQUIRE(model.classes[0].breakpoints.size() == 2);
    CHECK(model.classes[0].values[0] == 0.5);
    CHECK(model.classes[0].values[1] == 1.0);
}

TEST_CASE("calibration models round-trip through JSON") {
    testutil::TempDir dir;
    const CalibrationModel ts = TemperatureModel{1.75};
    save_model(dir.file("ts.json"), ts);
    const auto ts_back = load_model(dir.file("ts.json"));
    CHECK(std::get<TemperatureModel>(ts_back).temperature == 1.75);

    IsotonicModel ir;
    ir.classes.push_back({{0.1, 0.9}, {0.2, 0.8}});
    ir.classes.push_back({{0.2, 0.7}, {0.3, 0.6}});
    save_model(dir.file("ir.json"), CalibrationModel{ir});
    const auto ir_back = std::get<IsotonicModel>(load_model(dir.file("ir.json")));
    REQUIRE(ir_back.classes.size() == 2);
    CHECK(ir_back.classes[1].breakpoints[1] == 0.7);
    CHECK(ir_back.classes[1].values[1] == 0.6);

    testutil::write_file(dir.file("bad.json"), "{\"type\": \"unknown\"}");
    CHECK_THROWS_AS(load_model(dir.file("bad.json")), InputError);
    testutil::write_file(dir.file("mono.json"),
                         "{\"type\":\"isotonic\",\"classes\":[{\"breakpoints\":[0.1,0.2],"
                         "\"values\":[0.9,0.1]}]}");
    CHECK_THROWS_AS(load_model(dir.file("mono.json")), InputError);
}
