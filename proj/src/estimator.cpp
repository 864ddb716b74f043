#include "procal/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "procal/numeric.hpp"
#include "procal/parallel.hpp"
#include "procal/simplex.hpp"

namespace procal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_loo(const EstimatorOptions& options, const char* what) {
    if (!options.leave_one_out)
        throw InputError(std::string(what) + " requires leave-one-out weighting");
}

void require_canonical(const LabeledPredictions& dataset, const char* what) {
    if (dataset.class_count() != dataset.prediction_dim())
        throw DimensionMismatchError(std::string(what) +
                                     " needs predictions and labels on the same simplex");
}

int scalar_bin(double value, int bins) {
    return std::min(static_cast<int>(value * bins), bins - 1);
}

}  // namespace

CondExpectationEstimates cond_expectation_from(const LogWeightMatrix& weights,
                                               const LabeledPredictions& dataset) {
    const std::size_t n = dataset.size();
    const auto kc = static_cast<std::size_t>(dataset.class_count());
    const auto labels = dataset.labels();
    Matrix est(n, kc);

    detail::parallel_for(0, n, [&](std::size_t h) {
        thread_local std::vector<double> row;
        row.resize(n);
        weights.fill_row(h, row);

        // Per Appendix-style log-space evaluation: one LogSumExp over all
        // indices for the denominator and one per class over the indices that
        // carry that label. Fixed left-to-right order keeps rows reproducible.
        double den_max = kNegInf;
        thread_local std::vector<double> class_max;
        class_max.assign(kc, kNegInf);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = row[j];
            den_max = std::max(den_max, w);
            auto& cm = class_max[static_cast<std::size_t>(labels[j])];
            cm = std::max(cm, w);
        }

        auto out = est.row(h);
        if (den_max == kNegInf) {
            // Empty binning row: fall back to the point's own label.
            std::fill(out.begin(), out.end(), 0.0);
            out[static_cast<std::size_t>(labels[h])] = 1.0;
            return;
        }

        double den_sum = 0.0;
        thread_local std::vector<double> class_sum;
        class_sum.assign(kc, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = row[j];
            if (w == kNegInf) continue;
            den_sum += std::exp(w - den_max);
            const auto c = static_cast<std::size_t>(labels[j]);
            class_sum[c] += std::exp(w - class_max[c]);
        }
        const double log_den = den_max + std::log(den_sum);
        for (std::size_t c = 0; c < kc; ++c) {
            out[c] = class_sum[c] > 0.0
                         ? std::exp(class_max[c] + std::log(class_sum[c]) - log_den)
                         : 0.0;
        }
        detail::normalize_probabilities(out);
    });
    return est;
}

CondExpectationEstimates cond_expectation(const LabeledPredictions& dataset,
                                          const EstimatorOptions& options) {
    const auto weights = build_log_weights(dataset, options.kernel, options.leave_one_out,
                                           options.materialize_cap);
    return cond_expectation_from(weights, dataset);
}

double ce_direct_from(const CondExpectationEstimates& est, const LabeledPredictions& dataset,
                      const ConvexGenerator& f) {
    const auto& preds = dataset.predictions();
    KahanSum sum;
    for (std::size_t h = 0; h < est.rows(); ++h)
        sum.add(bregman_divergence(f, est.row(h), preds.row(h)));
    return sum.value() / static_cast<double>(est.rows());
}

double ce_kl_closed_form_from(const CondExpectationEstimates& est,
                              const LabeledPredictions& dataset) {
    const auto& preds = dataset.predictions();
    KahanSum sum;
    for (std::size_t h = 0; h < est.rows(); ++h) {
        const auto e = est.row(h);
        const auto g = preds.row(h);
        double term = 0.0;
        for (std::size_t c = 0; c < e.size(); ++c)
            if (e[c] > 0.0) term += e[c] * (std::log(e[c]) - clamped_log(g[c]));
        sum.add(term);
    }
    return sum.value() / static_cast<double>(est.rows());
}

double ce_l2_closed_form_from(const CondExpectationEstimates& est,
                              const LabeledPredictions& dataset) {
    const auto& preds = dataset.predictions();
    KahanSum sum;
    for (std::size_t h = 0; h < est.rows(); ++h) {
        const auto e = est.row(h);
        const auto g = preds.row(h);
        double term = 0.0;
        for (std::size_t c = 0; c < e.size(); ++c) {
            const double d = e[c] - g[c];
            term += d * d;
        }
        sum.add(term);
    }
    return sum.value() / static_cast<double>(est.rows());
}

double refinement_from(const CondExpectationEstimates& est, const ConvexGenerator& f) {
    KahanSum sum;
    for (std::size_t h = 0; h < est.rows(); ++h) sum.add(f.value(est.row(h)));
    return -sum.value() / static_cast<double>(est.rows());
}

double mean_generator_at_labels(const LabeledPredictions& dataset, const ConvexGenerator& f) {
    KahanSum sum;
    std::vector<double> onehot(static_cast<std::size_t>(dataset.class_count()), 0.0);
    for (int label : dataset.labels()) {
        onehot[static_cast<std::size_t>(label)] = 1.0;
        sum.add(f.value(onehot));
        onehot[static_cast<std::size_t>(label)] = 0.0;
    }
    return sum.value() / static_cast<double>(dataset.size());
}

double ce_direct(const LabeledPredictions& dataset, const ConvexGenerator& f,
                 const EstimatorOptions& options) {
    require_canonical(dataset, "ce_direct");
    return ce_direct_from(cond_expectation(dataset, options), dataset, f);
}

double ce_kl_closed_form(const LabeledPredictions& dataset, const EstimatorOptions& options) {
    require_canonical(dataset, "ce_kl_closed_form");
    return ce_kl_closed_form_from(cond_expectation(dataset, options), dataset);
}

double ce_l2_closed_form(const LabeledPredictions& dataset, const EstimatorOptions& options) {
    require_canonical(dataset, "ce_l2_closed_form");
    return ce_l2_closed_form_from(cond_expectation(dataset, options), dataset);
}

double refinement(const LabeledPredictions& dataset, const ConvexGenerator& f,
                  const EstimatorOptions& options) {
    require_loo(options, "refinement");
    return refinement_from(cond_expectation(dataset, options), f);
}

double empirical_risk(const LabeledPredictions& dataset, const ConvexGenerator& f) {
    require_canonical(dataset, "empirical_risk");
    const auto& preds = dataset.predictions();
    KahanSum sum;
    std::vector<double> onehot(static_cast<std::size_t>(dataset.class_count()), 0.0);
    const auto labels = dataset.labels();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        onehot[static_cast<std::size_t>(labels[i])] = 1.0;
        sum.add(bregman_divergence(f, onehot, preds.row(i)));
        onehot[static_cast<std::size_t>(labels[i])] = 0.0;
    }
    return sum.value() / static_cast<double>(dataset.size());
}

double ce_via_risk(const LabeledPredictions& dataset, const ConvexGenerator& f,
                   const EstimatorOptions& options) {
    require_canonical(dataset, "ce_via_risk");
    require_loo(options, "ce_via_risk");
    const double ref = refinement(dataset, f, options);
    return -ref + empirical_risk(dataset, f) - mean_generator_at_labels(dataset, f);
}

double sharpness(const LabeledPredictions& dataset, const ConvexGenerator& f,
                 const EstimatorOptions& options) {
    require_loo(options, "sharpness");
    const double ref = refinement(dataset, f, options);
    return -f.value(dataset.label_mean()) - ref;
}

DecompositionReport decompose(const LabeledPredictions& dataset, const ConvexGenerator& f,
                              const EstimatorOptions& options) {
    require_canonical(dataset, "decompose");
    require_loo(options, "decompose");
    const auto est = cond_expectation(dataset, options);
    DecompositionReport report;
    report.generator = f.name;
    report.kernel = describe(options.kernel);
    report.risk = empirical_risk(dataset, f);
    report.calibration_error = ce_direct_from(est, dataset, f);
    report.refinement = refinement_from(est, f);
    report.ce_via_risk =
        -report.refinement + report.risk - mean_generator_at_labels(dataset, f);
    report.sharpness = -f.value(dataset.label_mean()) - report.refinement;
    return report;
}

ClasswiseReport classwise_ce(const LabeledPredictions& dataset, const ConvexGenerator& binary_f,
                             const EstimatorOptions& options) {
    require_canonical(dataset, "classwise_ce");
    if (binary_f.domain_dimension != 0 && binary_f.domain_dimension != 2)
        throw DimensionMismatchError("class-wise CE needs a binary generator");
    const auto k = static_cast<std::size_t>(dataset.class_count());
    const std::size_t n = dataset.size();
    const auto& preds = dataset.predictions();
    const auto labels = dataset.labels();

    ClasswiseReport report;
    report.per_class.resize(k);
    for (std::size_t cls = 0; cls < k; ++cls) {
        Matrix binary(n, 2);
        std::vector<int> binary_labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = preds(i, cls);
            binary(i, 0) = q;
            binary(i, 1) = std::max(0.0, 1.0 - q);
            binary_labels[i] = labels[i] == static_cast<int>(cls) ? 0 : 1;
        }
        const LabeledPredictions reduced(std::move(binary), std::move(binary_labels));
        report.per_class[cls] = ce_direct(reduced, binary_f, options);
    }
    KahanSum sum;
    for (double v : report.per_class) sum.add(v);
    report.mean = sum.value() / static_cast<double>(k);
    return report;
}

double binned_classwise_ce1(const LabeledPredictions& dataset, int bins) {
    require_canonical(dataset, "binned_classwise_ce1");
    if (bins < 1) throw InputError("bin count must be >= 1");
    const auto k = static_cast<std::size_t>(dataset.class_count());
    const std::size_t n = dataset.size();
    const auto& preds = dataset.predictions();
    const auto labels = dataset.labels();

    KahanSum class_sum;
    std::vector<double> bin_pred(static_cast<std::size_t>(bins));
    std::vector<double> bin_label(static_cast<std::size_t>(bins));
    std::vector<std::size_t> bin_count(static_cast<std::size_t>(bins));
    for (std::size_t cls = 0; cls < k; ++cls) {
        std::fill(bin_pred.begin(), bin_pred.end(), 0.0);
        std::fill(bin_label.begin(), bin_label.end(), 0.0);
        std::fill(bin_count.begin(), bin_count.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            const auto b = static_cast<std::size_t>(scalar_bin(preds(i, cls), bins));
            bin_pred[b] += preds(i, cls);
            bin_label[b] += labels[i] == static_cast<int>(cls) ? 1.0 : 0.0;
            ++bin_count[b];
        }
        double total = 0.0;
        for (std::size_t b = 0; b < bin_pred.size(); ++b) {
            if (bin_count[b] == 0) continue;
            const auto cnt = static_cast<double>(bin_count[b]);
            total += (cnt / static_cast<double>(n)) *
                     std::abs(bin_label[b] / cnt - bin_pred[b] / cnt);
        }
        class_sum.add(total);
    }
    return class_sum.value() / static_cast<double>(k);
}

double binned_toplabel_ece(const LabeledPredictions& dataset, int bins) {
    require_canonical(dataset, "binned_toplabel_ece");
    if (bins < 1) throw InputError("bin count must be >= 1");
    const std::size_t n = dataset.size();
    const auto& preds = dataset.predictions();
    const auto labels = dataset.labels();

    std::vector<double> bin_conf(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> bin_correct(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> bin_count(static_cast<std::size_t>(bins), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = preds.row(i);
        std::size_t top = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[top]) top = c;  // ties keep the smallest index
        const auto b = static_cast<std::size_t>(scalar_bin(row[top], bins));
        bin_conf[b] += row[top];
        bin_correct[b] += static_cast<int>(top) == labels[i] ? 1.0 : 0.0;
        ++bin_count[b];
    }
    double total = 0.0;
    for (std::size_t b = 0; b < bin_conf.size(); ++b) {
        if (bin_count[b] == 0) continue;
        const auto cnt = static_cast<double>(bin_count[b]);
        total += (cnt / static_cast<double>(n)) *
                 std::abs(bin_correct[b] / cnt - bin_conf[b] / cnt);
    }
    return total;
}

double layer_sharpness(const Matrix& features, std::span<const int> labels, int class_count,
                       const ConvexGenerator& f, const EstimatorOptions& options) {
    if (features.cols() < 1) throw DimensionMismatchError("layer features need d >= 1");
    if (features.rows() != labels.size())
        throw DimensionMismatchError("feature rows and labels differ in length");
    for (std::size_t i = 0; i < features.rows() * features.cols(); ++i)
        if (!std::isfinite(features.data()[i])) throw NonFiniteError("layer features");

    Matrix preds(features.rows(), features.cols() + 1);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto mapped = softmax_extended(features.row(r));
        std::copy(mapped.values().begin(), mapped.values().end(), preds.row(r).begin());
    }
    const LabeledPredictions dataset(std::move(preds), std::vector<int>(labels.begin(), labels.end()),
                                     class_count);
    return sharpness(dataset, f, options);
}

}  // namespace procal
