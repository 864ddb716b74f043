#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "procal/dataset.hpp"
#include "procal/matrix.hpp"

namespace procal {

struct DirichletKernel {
    double bandwidth = 0.0;
};

struct BinningKernel {
    int bins_per_axis = 15;
};

using KernelSpec = std::variant<DirichletKernel, BinningKernel>;

std::string describe(const KernelSpec& spec);

// Log-density at x of the Dirichlet distribution with concentration
// center / bandwidth + 1, evaluated entirely in log space: entries of x are
// clamped before the log so the result is finite even at the vertices.
double log_dirichlet_kernel(std::span<const double> x, std::span<const double> center,
                            double bandwidth);

// Flat bin id per prediction row. Bins are an equal-width grid over the first
// k-1 coordinates (the last coordinate is determined by the others); the
// boundary value 1.0 falls into the last bin. For k = 2 this is plain
// equal-width binning of the first coordinate.
std::vector<long> bin_indices(const Matrix& predictions, int bins_per_axis);

// Pairwise log kernel weights between dataset rows. Rows are materialized in
// one n-by-n block when n <= materialize_cap and recomputed on demand above
// it, bounding memory at O(n).
class LogWeightMatrix {
public:
    std::size_t size() const { return n_; }
    bool diagonal_excluded() const { return exclude_diagonal_; }
    bool is_binning() const { return binning_; }

    // Writes row h (log k(g(x_h), g(x_j)) for every j) into out; the diagonal
    // entry is -inf when excluded, and binning non-matches are -inf.
    void fill_row(std::size_t h, std::span<double> out) const;

    // Binning rows whose bin holds no other point; the conditional-expectation
    // estimator falls back to the row's own label there.
    const std::vector<std::size_t>& empty_rows() const { return empty_rows_; }

private:
    friend LogWeightMatrix build_log_weights(const LabeledPredictions&, const KernelSpec&, bool,
                                             std::size_t);
    std::size_t n_ = 0;
    bool exclude_diagonal_ = false;
    bool binning_ = false;
    // Dirichlet state: per-center log normalizers plus the data needed to
    // rebuild any row.
    double inv_bandwidth_ = 0.0;
    std::vector<double> log_normalizer_;
    Matrix centers_;
    Matrix log_points_;
    // Binning state.
    std::vector<long> bins_;
    std::vector<std::size_t> empty_rows_;
    // Materialized block when n <= cap.
    std::vector<double> dense_;
};

inline constexpr std::size_t kDefaultMaterializeCap = 20000;

LogWeightMatrix build_log_weights(const LabeledPredictions& dataset, const KernelSpec& kernel,
                                  bool exclude_diagonal,
                                  std::size_t materialize_cap = kDefaultMaterializeCap);

// Leave-one-out log likelihood of the Dirichlet KDE at one bandwidth:
// sum_h LSE_{j != h} log k(g(x_h), g(x_j)) - n log(n-1).
double loo_log_likelihood(const LabeledPredictions& dataset, double bandwidth);

struct BandwidthScore {
    double bandwidth = 0.0;
    double log_likelihood = 0.0;
};

// One LOO log-likelihood per grid entry, in grid order. Shares the
// bandwidth-independent inner products across candidates.
std::vector<BandwidthScore> loo_mle_scores(const LabeledPredictions& dataset,
                                           std::span<const double> grid);

// Grid entry maximizing the LOO log likelihood; ties go to the smaller value.
double bandwidth_loo_mle(const LabeledPredictions& dataset, std::span<const double> grid);

// {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1}
std::vector<double> default_bandwidth_grid();

}  // namespace procal
