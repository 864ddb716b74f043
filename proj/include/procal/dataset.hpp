#pragma once

#include <optional>
#include <span>
#include <vector>

#include "procal/matrix.hpp"
#include "procal/simplex.hpp"

namespace procal {

// Labels are stored as class indices and expanded on demand.
struct OneHotLabel {
    int class_index = 0;

    std::vector<double> expand(int class_count) const {
        std::vector<double> v(static_cast<std::size_t>(class_count), 0.0);
        v[static_cast<std::size_t>(class_index)] = 1.0;
        return v;
    }
};

// An aligned set of simplex predictions and integer labels; the dataset every
// estimator consumes. class_count may exceed the prediction dimension only in
// the layer-sharpness setting, where predictions live on a different simplex
// than the label space.
class LabeledPredictions {
public:
    LabeledPredictions(Matrix predictions, std::vector<int> labels, int class_count = 0,
                       std::optional<Matrix> logits = std::nullopt);

    std::size_t size() const { return labels_.size(); }
    int prediction_dim() const { return static_cast<int>(predictions_.cols()); }
    int class_count() const { return class_count_; }

    const Matrix& predictions() const { return predictions_; }
    std::span<const int> labels() const { return labels_; }

    bool has_logits() const { return logits_.has_value(); }
    const Matrix& logits() const;

    // Empirical mean of the one-hot labels (length class_count).
    std::vector<double> label_mean() const;

private:
    Matrix predictions_;
    std::vector<int> labels_;
    int class_count_ = 0;
    std::optional<Matrix> logits_;
};

}  // namespace procal
