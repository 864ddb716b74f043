#pragma once

#include <string>
#include <vector>

#include "procal/bregman.hpp"
#include "procal/dataset.hpp"
#include "procal/kernel.hpp"

namespace procal {

struct EstimatorOptions {
    KernelSpec kernel = DirichletKernel{0.02};
    // Leave-one-out weighting (j != h). Refinement-based quantities require it;
    // the conditional expectation and direct CE can include the diagonal for
    // diagnostic use.
    bool leave_one_out = true;
    std::size_t materialize_cap = kDefaultMaterializeCap;
};

// n x class_count matrix; row h estimates E[Y | g(x_h)] as a kernel-weighted
// convex combination of the one-hot labels.
using CondExpectationEstimates = Matrix;

CondExpectationEstimates cond_expectation(const LabeledPredictions& dataset,
                                          const EstimatorOptions& options);
CondExpectationEstimates cond_expectation_from(const LogWeightMatrix& weights,
                                               const LabeledPredictions& dataset);

// (1/n) sum_h D_F(E_h, g(x_h)).
double ce_direct(const LabeledPredictions& dataset, const ConvexGenerator& f,
                 const EstimatorOptions& options);

// Closed forms of the two Bregman specializations; each must agree with the
// generic path on the same weights.
double ce_kl_closed_form(const LabeledPredictions& dataset, const EstimatorOptions& options);
double ce_l2_closed_form(const LabeledPredictions& dataset, const EstimatorOptions& options);

// -(1/n) sum_h F(E_h); leave-one-out is mandatory.
double refinement(const LabeledPredictions& dataset, const ConvexGenerator& f,
                  const EstimatorOptions& options);

// (1/n) sum_i D_F(y_i, g(x_i)); no kernel involved.
double empirical_risk(const LabeledPredictions& dataset, const ConvexGenerator& f);

// -REF + (1/n) sum_i (D_F(y_i, g(x_i)) - F(y_i)); may come out slightly
// negative at finite n.
double ce_via_risk(const LabeledPredictions& dataset, const ConvexGenerator& f,
                   const EstimatorOptions& options);

// -F(mean label) - REF; for the entropy generator this estimates the mutual
// information between prediction and label.
double sharpness(const LabeledPredictions& dataset, const ConvexGenerator& f,
                 const EstimatorOptions& options);

struct DecompositionReport {
    double risk = 0.0;
    double calibration_error = 0.0;  // direct path
    double ce_via_risk = 0.0;
    double refinement = 0.0;
    double sharpness = 0.0;
    std::string generator;
    std::string kernel;
};

// All of the above in one pass over a shared weight matrix.
DecompositionReport decompose(const LabeledPredictions& dataset, const ConvexGenerator& f,
                              const EstimatorOptions& options);

struct ClasswiseReport {
    double mean = 0.0;
    std::vector<double> per_class;
};

// One-vs-rest reduction: per class i, the direct CE of the binary dataset
// {((g_i, 1-g_i), 1{y=i})} under a binary generator, averaged over classes.
ClasswiseReport classwise_ce(const LabeledPredictions& dataset, const ConvexGenerator& binary_f,
                             const EstimatorOptions& options);

// Equal-width binning estimate of the class-wise L1 calibration error.
double binned_classwise_ce1(const LabeledPredictions& dataset, int bins = 15);

// Equal-width binning estimate of the top-label L1 calibration error (the
// usual ECE); argmax ties break toward the smallest class index.
double binned_toplabel_ece(const LabeledPredictions& dataset, int bins = 15);

// Sharpness of an intermediate representation: rows are mapped through
// softmax_extended into the (d+1)-simplex and treated as predictions. The
// generator acts on the class_count-dimensional conditional-expectation
// estimates, not on the (d+1)-simplex.
double layer_sharpness(const Matrix& features, std::span<const int> labels, int class_count,
                       const ConvexGenerator& f, const EstimatorOptions& options);

// Helpers shared by the one-pass decomposition; exposed for tests.
double ce_direct_from(const CondExpectationEstimates& est, const LabeledPredictions& dataset,
                      const ConvexGenerator& f);
double ce_kl_closed_form_from(const CondExpectationEstimates& est,
                              const LabeledPredictions& dataset);
double ce_l2_closed_form_from(const CondExpectationEstimates& est,
                              const LabeledPredictions& dataset);
double refinement_from(const CondExpectationEstimates& est, const ConvexGenerator& f);
double mean_generator_at_labels(const LabeledPredictions& dataset, const ConvexGenerator& f);

}  // namespace procal
