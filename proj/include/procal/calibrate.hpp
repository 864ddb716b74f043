#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "procal/dataset.hpp"

namespace procal {

struct TemperatureModel {
    double temperature = 1.0;
};

struct TemperatureFitResult {
    TemperatureModel model;
    double nll = 0.0;               // mean NLL at the fitted temperature
    bool degenerate_labels = false;  // single class present; boundary returned
};

// Minimizes mean NLL of softmax(z / T) by golden-section search on log T over
// T in [0.05, 20]. Falls back to log of the probabilities when the dataset
// carries no logits (the lost per-row constant cancels inside the softmax).
TemperatureFitResult temperature_fit(const LabeledPredictions& validation);

// Row-wise softmax(z / T); the per-row argmax is unchanged for any T > 0.
LabeledPredictions temperature_apply(const TemperatureModel& model,
                                     const LabeledPredictions& dataset);

struct IsotonicClassModel {
    std::vector<double> breakpoints;  // sorted unique scores
    std::vector<double> values;       // non-decreasing fitted values in [0, 1]
};

struct IsotonicModel {
    std::vector<IsotonicClassModel> classes;
};

// Per-class one-vs-rest least-squares monotone fit of 1{y=i} against g_i by
// pool-adjacent-violators; ties in scores are pooled first.
IsotonicModel isotonic_fit(const LabeledPredictions& validation);

// Piecewise-constant right-continuous interpolation per class, clamped outside
// the fitted range, then a row renormalization (all-zero rows become uniform).
LabeledPredictions isotonic_apply(const IsotonicModel& model, const LabeledPredictions& dataset);

double isotonic_predict_one(const IsotonicClassModel& cls, double score);

// Least-squares non-decreasing fit of weighted targets, in the given order.
std::vector<double> pav_nondecreasing(std::span<const double> targets,
                                      std::span<const double> weights);

using CalibrationModel = std::variant<TemperatureModel, IsotonicModel>;

// {"type":"temperature","T":...} / {"type":"isotonic","classes":[...]}
nlohmann::json to_json(const CalibrationModel& model);
CalibrationModel calibration_model_from_json(const nlohmann::json& doc);
void save_model(const std::filesystem::path& path, const CalibrationModel& model);
CalibrationModel load_model(const std::filesystem::path& path);

LabeledPredictions apply_model(const CalibrationModel& model, const LabeledPredictions& dataset);

}  // namespace procal
