#include "procal/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "procal/numeric.hpp"
#include "procal/parallel.hpp"
#include "procal/simplex.hpp"

namespace procal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double dirichlet_log_normalizer(std::span<const double> center, double bandwidth) {
    // Concentration alpha_k = center_k / h + 1, so sum alpha = K + (sum center_k) / h.
    double alpha_sum = static_cast<double>(center.size());
    double lgamma_sum = 0.0;
    for (double c : center) {
        alpha_sum += c / bandwidth;
        lgamma_sum += std::lgamma(c / bandwidth + 1.0);
    }
    return std::lgamma(alpha_sum) - lgamma_sum;
}

}  // namespace

std::string describe(const KernelSpec& spec) {
    if (const auto* d = std::get_if<DirichletKernel>(&spec))
        return "dirichlet(h=" + std::to_string(d->bandwidth) + ")";
    const auto& b = std::get<BinningKernel>(spec);
    return "binning(bins=" + std::to_string(b.bins_per_axis) + ")";
}

double log_dirichlet_kernel(std::span<const double> x, std::span<const double> center,
                            double bandwidth) {
    if (bandwidth <= 0.0 || !std::isfinite(bandwidth)) throw BandwidthNonPositiveError(bandwidth);
    if (x.size() != center.size())
        throw DimensionMismatchError("kernel arguments have sizes " + std::to_string(x.size()) +
                                     " and " + std::to_string(center.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += center[i] * clamped_log(x[i]);
    return dirichlet_log_normalizer(center, bandwidth) + dot / bandwidth;
}

std::vector<long> bin_indices(const Matrix& predictions, int bins_per_axis) {
    if (bins_per_axis < 1)
        throw InputError("bins_per_axis must be >= 1, got " + std::to_string(bins_per_axis));
    const std::size_t n = predictions.rows();
    const std::size_t free_dims = predictions.cols() - 1;
    std::map<std::vector<int>, long> ids;
    std::vector<long> out(n);
    std::vector<int> key(free_dims);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = predictions.row(r);
        for (std::size_t c = 0; c < free_dims; ++c) {
            const int b = static_cast<int>(row[c] * bins_per_axis);
            key[c] = std::min(b, bins_per_axis - 1);
        }
        auto [it, inserted] = ids.try_emplace(key, static_cast<long>(ids.size()));
        out[r] = it->second;
    }
    return out;
}

void LogWeightMatrix::fill_row(std::size_t h, std::span<double> out) const {
    if (!dense_.empty()) {
        std::memcpy(out.data(), dense_.data() + h * n_, n_ * sizeof(double));
        return;
    }
    if (binning_) {
        const long bin = bins_[h];
        for (std::size_t j = 0; j < n_; ++j) out[j] = bins_[j] == bin ? 0.0 : kNegInf;
    } else {
        const auto log_x = log_points_.row(h);
        const std::size_t k = log_points_.cols();
        for (std::size_t j = 0; j < n_; ++j) {
            const auto center = centers_.row(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < k; ++c) dot += center[c] * log_x[c];
            out[j] = log_normalizer_[j] + inv_bandwidth_ * dot;
        }
    }
    if (exclude_diagonal_) out[h] = kNegInf;
}

LogWeightMatrix build_log_weights(const LabeledPredictions& dataset, const KernelSpec& kernel,
                                  bool exclude_diagonal, std::size_t materialize_cap) {
    const std::size_t n = dataset.size();
    LogWeightMatrix w;
    w.n_ = n;
    w.exclude_diagonal_ = exclude_diagonal;

    if (const auto* dir = std::get_if<DirichletKernel>(&kernel)) {
        if (dir->bandwidth <= 0.0 || !std::isfinite(dir->bandwidth))
            throw BandwidthNonPositiveError(dir->bandwidth);
        w.binning_ = false;
        w.inv_bandwidth_ = 1.0 / dir->bandwidth;
        w.centers_ = dataset.predictions();
        const auto& preds = dataset.predictions();
        w.log_points_ = Matrix(n, preds.cols());
        w.log_normalizer_.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < preds.cols(); ++c)
                w.log_points_(r, c) = clamped_log(preds(r, c));
            w.log_normalizer_[r] = dirichlet_log_normalizer(preds.row(r), dir->bandwidth);
        }
    } else {
        const auto& bin = std::get<BinningKernel>(kernel);
        w.binning_ = true;
        w.bins_ = bin_indices(dataset.predictions(), bin.bins_per_axis);
        std::map<long, std::size_t> counts;
        for (long b : w.bins_) ++counts[b];
        if (exclude_diagonal) {
            for (std::size_t r = 0; r < n; ++r)
                if (counts[w.bins_[r]] == 1) w.empty_rows_.push_back(r);
        }
    }

    if (n <= materialize_cap) {
        std::vector<double> dense(n * n);
        detail::parallel_for(0, n, [&](std::size_t h) {
            w.fill_row(h, {dense.data() + h * n, n});
        });
        w.dense_ = std::move(dense);
    }
    return w;
}

namespace {

void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw EmptyGridError();
    for (double h : grid)
        if (h <= 0.0 || !std::isfinite(h)) throw BandwidthNonPositiveError(h);
}

}  // namespace

std::vector<BandwidthScore> loo_mle_scores(const LabeledPredictions& dataset,
                                           std::span<const double> grid) {
    check_grid(grid);
    const std::size_t n = dataset.size();
    const std::size_t k = dataset.predictions().cols();
    const std::size_t candidates = grid.size();
    const auto& preds = dataset.predictions();

    Matrix log_preds(n, k);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) log_preds(r, c) = clamped_log(preds(r, c));

    // Per-candidate log normalizers; the inner products <g_j, log g_h> are
    // bandwidth independent and shared across candidates.
    Matrix normalizers(candidates, n);
    for (std::size_t ci = 0; ci < candidates; ++ci)
        for (std::size_t j = 0; j < n; ++j)
            normalizers(ci, j) = dirichlet_log_normalizer(preds.row(j), grid[ci]);

    Matrix row_lse(n, candidates);
    detail::parallel_for(0, n, [&](std::size_t h) {
        std::vector<double> dots(n);
        const auto log_x = log_preds.row(h);
        for (std::size_t j = 0; j < n; ++j) {
            const auto center = preds.row(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < k; ++c) dot += center[c] * log_x[c];
            dots[j] = dot;
        }
        std::vector<double> row(n);
        for (std::size_t ci = 0; ci < candidates; ++ci) {
            const double inv_h = 1.0 / grid[ci];
            for (std::size_t j = 0; j < n; ++j) row[j] = normalizers(ci, j) + inv_h * dots[j];
            row[h] = kNegInf;
            row_lse(h, ci) = log_sum_exp(row);
        }
    });

    std::vector<BandwidthScore> scores(candidates);
    const double offset = static_cast<double>(n) * std::log(static_cast<double>(n - 1));
    for (std::size_t ci = 0; ci < candidates; ++ci) {
        KahanSum total;
        for (std::size_t h = 0; h < n; ++h) total.add(row_lse(h, ci));
        scores[ci] = {grid[ci], total.value() - offset};
    }
    return scores;
}

double loo_log_likelihood(const LabeledPredictions& dataset, double bandwidth) {
    const double grid[] = {bandwidth};
    return loo_mle_scores(dataset, grid).front().log_likelihood;
}

double bandwidth_loo_mle(const LabeledPredictions& dataset, std::span<const double> grid) {
    const auto scores = loo_mle_scores(dataset, grid);
    double best_h = scores.front().bandwidth;
    double best_ll = scores.front().log_likelihood;
    for (const auto& s : scores) {
        if (s.log_likelihood > best_ll || (s.log_likelihood == best_ll && s.bandwidth < best_h)) {
            best_ll = s.log_likelihood;
            best_h = s.bandwidth;
        }
    }
    return best_h;
}

std::vector<double> default_bandwidth_grid() {
    return {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
}

}  // namespace procal
