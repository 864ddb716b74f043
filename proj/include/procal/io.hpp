#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "procal/dataset.hpp"
#include "procal/matrix.hpp"

namespace procal {

// Prediction files. CSV: header p_0,...,p_{k-1},label (probabilities) or
// z_0,...,z_{k-1},label (logits). JSONL: one object per line with "probs" or
// "logits" plus "label". Auto picks by extension and header.
enum class PredictionFormat { Auto, ProbCsv, LogitCsv, ProbJsonl, LogitJsonl };

LabeledPredictions load_predictions(const std::filesystem::path& path,
                                    PredictionFormat format = PredictionFormat::Auto);

// Probability CSV with 17-significant-digit values: loading it back yields
// bit-identical predictions. write_logits additionally requires the dataset
// to carry logits and emits the logit CSV format instead.
void save_predictions(const std::filesystem::path& path, const LabeledPredictions& dataset,
                      bool write_logits = false);

// Feature files for layer sharpness: header f_0,...,f_{d-1},label.
struct FeatureTable {
    Matrix features;
    std::vector<int> labels;
    int class_count = 0;  // max label + 1
};

FeatureTable load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const Matrix& features,
                   std::span<const int> labels);

// Sidecar truth CSV for synthetic data: header t_0,...,t_{k-1}.
void save_truth(const std::filesystem::path& path, const Matrix& truth);
Matrix load_truth(const std::filesystem::path& path);

// Shortest-exact double formatting used by every writer.
std::string format_double(double v);

}  // namespace procal
