#include "procal/dataset.hpp"

namespace procal {

LabeledPredictions::LabeledPredictions(Matrix predictions, std::vector<int> labels,
                                       int class_count, std::optional<Matrix> logits)
    : predictions_(std::move(predictions)),
      labels_(std::move(labels)),
      class_count_(class_count),
      logits_(std::move(logits)) {
    if (predictions_.rows() != labels_.size())
        throw DimensionMismatchError("predictions have " + std::to_string(predictions_.rows()) +
                                     " rows but there are " + std::to_string(labels_.size()) +
                                     " labels");
    if (labels_.size() < 2)
        throw DimensionMismatchError("a dataset needs n >= 2 samples, got " +
                                     std::to_string(labels_.size()));
    if (predictions_.cols() < 2)
        throw DimensionMismatchError("predictions need k >= 2 columns");
    if (class_count_ == 0) class_count_ = static_cast<int>(predictions_.cols());
    if (class_count_ < 2) throw DimensionMismatchError("class_count must be >= 2");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] < 0 || labels_[i] >= class_count_)
            throw LabelOutOfRangeError(i, labels_[i], class_count_);
    }
    for (std::size_t r = 0; r < predictions_.rows(); ++r)
        detail::normalize_probabilities(predictions_.row(r));
    if (logits_.has_value() &&
        (logits_->rows() != predictions_.rows() || logits_->cols() != predictions_.cols()))
        throw DimensionMismatchError("logits shape differs from predictions shape");
}

const Matrix& LabeledPredictions::logits() const {
    if (!logits_.has_value()) throw InternalError("dataset carries no logits");
    return *logits_;
}

std::vector<double> LabeledPredictions::label_mean() const {
    std::vector<double> mean(static_cast<std::size_t>(class_count_), 0.0);
    for (int label : labels_) mean[static_cast<std::size_t>(label)] += 1.0;
    for (double& v : mean) v /= static_cast<double>(labels_.size());
    return mean;
}

}  // namespace procal
