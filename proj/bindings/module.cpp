#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "procal/calibrate.hpp"
#include "procal/estimator.hpp"
#include "procal/io.hpp"
#include "procal/synth.hpp"

namespace py = pybind11;
using namespace procal;

namespace {

Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                         const char* name) {
    if (a.ndim() != 2) throw InputError(std::string(name) + " must be a 2-d array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data());
    return m;
}

py::array_t<double> array_from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data(), m.data() + m.rows() * m.cols(), out.mutable_data());
    return out;
}

std::vector<int> labels_from_array(const py::array_t<long, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw InputError("labels must be a 1-d array");
    std::vector<int> labels(static_cast<std::size_t>(a.size()));
    for (py::ssize_t i = 0; i < a.size(); ++i) labels[static_cast<std::size_t>(i)] =
        static_cast<int>(a.data()[i]);
    return labels;
}

using PredsArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelsArray = py::array_t<long, py::array::c_style | py::array::forcecast>;

LabeledPredictions dataset_from(const PredsArray& preds, const LabelsArray& labels,
                                int class_count = 0) {
    return LabeledPredictions(matrix_from_array(preds, "predictions"), labels_from_array(labels),
                              class_count);
}

KernelSpec kernel_from(const std::string& kernel, double bandwidth, int bins) {
    if (kernel == "dirichlet") {
        if (bandwidth <= 0.0)
            throw InputError("bandwidth must be positive; select one with bandwidth_loo_mle");
        return DirichletKernel{bandwidth};
    }
    if (kernel == "binning") return BinningKernel{bins};
    throw InputError("unknown kernel '" + kernel + "'");
}

EstimatorOptions options_from(const std::string& kernel, double bandwidth, int bins,
                              bool leave_one_out) {
    return {kernel_from(kernel, bandwidth, bins), leave_one_out};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Proper calibration error, refinement, and sharpness estimation";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

    m.def(
        "make_prob_vector",
        [](const std::vector<double>& raw) { return make_prob_vector(raw).vec(); },
        py::arg("raw"), "Normalize non-negative reals to a simplex point.");

    m.def(
        "softmax_extended",
        [](const std::vector<double>& activations) { return softmax_extended(activations).vec(); },
        py::arg("activations"),
        "Softmax with one appended zero logit; injective from R^d into the (d+1)-simplex.");

    m.def(
        "temp_map",
        [](const std::vector<double>& p, double t) { return temp_map(p, t); },
        py::arg("p"), py::arg("t"), "Temperature scaling of probabilities (p^(1/t) renormalized).");

    m.def(
        "generate",
        [](std::size_t n, int k, double t1, double t2, std::uint64_t seed) {
            const auto samples = generate({n, k, t1, t2, seed});
            const auto ds = to_labeled_predictions(samples);
            py::dict out;
            out["predictions"] = array_from_matrix(ds.predictions());
            out["truth"] = array_from_matrix(truth_matrix(samples));
            py::array_t<long> labels(static_cast<py::ssize_t>(ds.size()));
            for (std::size_t i = 0; i < ds.size(); ++i)
                labels.mutable_data()[i] = ds.labels()[i];
            out["labels"] = labels;
            return out;
        },
        py::arg("n"), py::arg("k"), py::arg("t1") = 0.9, py::arg("t2") = 0.6, py::arg("seed") = 0,
        "Synthetic miscalibrated classifier with exact conditional probabilities.");

    m.def(
        "ground_truth_ce",
        [](int k, const std::string& generator, double t1, double t2, std::size_t draws,
           std::uint64_t seed) {
            const auto est = ground_truth_ce({1, k, t1, t2, 0}, generator_by_name(generator),
                                             draws, seed);
            return py::make_tuple(est.value, est.std_error);
        },
        py::arg("k"), py::arg("generator") = "kl", py::arg("t1") = 0.9, py::arg("t2") = 0.6,
        py::arg("draws") = 1000000, py::arg("seed") = 990001,
        "Monte-Carlo ground-truth calibration error of the synthetic task.");

    m.def(
        "cond_expectation",
        [](const PredsArray& preds, const LabelsArray& labels, const std::string& kernel,
           double bandwidth, int bins, bool leave_one_out) {
            const auto ds = dataset_from(preds, labels);
            return array_from_matrix(
                cond_expectation(ds, options_from(kernel, bandwidth, bins, leave_one_out)));
        },
        py::arg("predictions"), py::arg("labels"), py::arg("kernel") = "dirichlet",
        py::arg("bandwidth") = 0.0, py::arg("bins") = 15, py::arg("leave_one_out") = true,
        "Kernel estimate of E[Y | prediction] per row.");

    m.def(
        "decompose",
        [](const PredsArray& preds, const LabelsArray& labels, const std::string& generator,
           const std::string& kernel, double bandwidth, int bins, bool leave_one_out) {
            const auto ds = dataset_from(preds, labels);
            const auto r = decompose(ds, generator_by_name(generator),
                                     options_from(kernel, bandwidth, bins, leave_one_out));
            py::dict out;
            out["risk"] = r.risk;
            out["ce"] = r.calibration_error;
            out["ce_via_risk"] = r.ce_via_risk;
            out["refinement"] = r.refinement;
            out["sharpness"] = r.sharpness;
            out["generator"] = r.generator;
            out["kernel"] = r.kernel;
            return out;
        },
        py::arg("predictions"), py::arg("labels"), py::arg("generator") = "kl",
        py::arg("kernel") = "dirichlet", py::arg("bandwidth") = 0.0, py::arg("bins") = 15,
        py::arg("leave_one_out") = true,
        "Risk, calibration error (both paths), refinement, and sharpness in one pass.");

    m.def(
        "ce_direct",
        [](const PredsArray& preds, const LabelsArray& labels, const std::string& generator,
           const std::string& kernel, double bandwidth, int bins, bool leave_one_out) {
            return ce_direct(dataset_from(preds, labels), generator_by_name(generator),
                             options_from(kernel, bandwidth, bins, leave_one_out));
        },
        py::arg("predictions"), py::arg("labels"), py::arg("generator") = "kl",
        py::arg("kernel") = "dirichlet", py::arg("bandwidth") = 0.0, py::arg("bins") = 15,
        py::arg("leave_one_out") = true);

    m.def(
        "classwise_ce",
        [](const PredsArray& preds, const LabelsArray& labels, const std::string& generator,
           const std::string& kernel, double bandwidth, int bins, bool leave_one_out) {
            const auto r = classwise_ce(dataset_from(preds, labels), generator_by_name(generator),
                                        options_from(kernel, bandwidth, bins, leave_one_out));
            return py::make_tuple(r.mean, r.per_class);
        },
        py::arg("predictions"), py::arg("labels"), py::arg("generator") = "binary-entropy",
        py::arg("kernel") = "dirichlet", py::arg("bandwidth") = 0.0, py::arg("bins") = 15,
        py::arg("leave_one_out") = true,
        "One-vs-rest class-wise CE: (mean, per-class values).");

    m.def(
        "binned_classwise_ce1",
        [](const PredsArray& preds, const LabelsArray& labels, int bins) {
            return binned_classwise_ce1(dataset_from(preds, labels), bins);
        },
        py::arg("predictions"), py::arg("labels"), py::arg("bins") = 15);

    m.def(
        "binned_toplabel_ece",
        [](const PredsArray& preds, const LabelsArray& labels, int bins) {
            return binned_toplabel_ece(dataset_from(preds, labels), bins);
        },
        py::arg("predictions"), py::arg("labels"), py::arg("bins") = 15);

    m.def(
        "bandwidth_loo_mle",
        [](const PredsArray& preds, const LabelsArray& labels,
           std::optional<std::vector<double>> grid) {
            const auto ds = dataset_from(preds, labels);
            const auto g = grid.value_or(default_bandwidth_grid());
            return bandwidth_loo_mle(ds, g);
        },
        py::arg("predictions"), py::arg("labels"), py::arg("grid") = py::none(),
        "Leave-one-out maximum-likelihood bandwidth over a grid.");

    m.def(
        "layer_sharpness",
        [](const PredsArray& features, const LabelsArray& labels, int class_count,
           const std::string& generator, const std::string& kernel, double bandwidth, int bins,
           bool leave_one_out) {
            return layer_sharpness(matrix_from_array(features, "features"),
                                   labels_from_array(labels), class_count,
                                   generator_by_name(generator),
                                   options_from(kernel, bandwidth, bins, leave_one_out));
        },
        py::arg("features"), py::arg("labels"), py::arg("class_count"), py::arg("generator") = "kl",
        py::arg("kernel") = "dirichlet", py::arg("bandwidth") = 0.0, py::arg("bins") = 15,
        py::arg("leave_one_out") = true,
        "Sharpness of an intermediate feature layer via the extended softmax map.");

    m.def(
        "temperature_fit",
        [](const PredsArray& logits, const LabelsArray& labels) {
            auto z = matrix_from_array(logits, "logits");
            Matrix preds(z.rows(), z.cols());
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const auto p = softmax(z.row(r));
                std::copy(p.begin(), p.end(), preds.row(r).begin());
            }
            const LabeledPredictions ds(std::move(preds), labels_from_array(labels), 0,
                                        std::move(z));
            const auto fit = temperature_fit(ds);
            py::dict out;
            out["T"] = fit.model.temperature;
            out["nll"] = fit.nll;
            out["degenerate_labels"] = fit.degenerate_labels;
            return out;
        },
        py::arg("logits"), py::arg("labels"),
        "Fit temperature scaling by NLL minimization on logits.");

    m.def(
        "temperature_apply",
        [](const PredsArray& logits, double temperature) {
            auto z = matrix_from_array(logits, "logits");
            Matrix preds(z.rows(), z.cols());
            std::vector<int> labels(z.rows(), 0);
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const auto p = softmax(z.row(r));
                std::copy(p.begin(), p.end(), preds.row(r).begin());
            }
            const LabeledPredictions ds(std::move(preds), std::move(labels), 0, std::move(z));
            const auto out = temperature_apply(TemperatureModel{temperature}, ds);
            return array_from_matrix(out.predictions());
        },
        py::arg("logits"), py::arg("temperature"), "softmax(logits / T) row-wise.");

    m.def(
        "isotonic_fit",
        [](const PredsArray& preds, const LabelsArray& labels) {
            const auto model = isotonic_fit(dataset_from(preds, labels));
            py::list classes;
            for (const auto& cls : model.classes) {
                py::dict c;
                c["breakpoints"] = cls.breakpoints;
                c["values"] = cls.values;
                classes.append(c);
            }
            return classes;
        },
        py::arg("predictions"), py::arg("labels"),
        "Per-class one-vs-rest isotonic regression (pool-adjacent-violators).");

    m.def(
        "isotonic_apply",
        [](const py::list& classes, const PredsArray& preds) {
            IsotonicModel model;
            for (const auto& item : classes) {
                const auto c = item.cast<py::dict>();
                IsotonicClassModel cls;
                cls.breakpoints = c["breakpoints"].cast<std::vector<double>>();
                cls.values = c["values"].cast<std::vector<double>>();
                model.classes.push_back(std::move(cls));
            }
            auto m_preds = matrix_from_array(preds, "predictions");
            std::vector<int> labels(m_preds.rows(), 0);
            const LabeledPredictions ds(std::move(m_preds), std::move(labels));
            return array_from_matrix(isotonic_apply(model, ds).predictions());
        },
        py::arg("model"), py::arg("predictions"),
        "Apply a fitted isotonic model and renormalize rows.");

    m.attr("__version__") = "0.1.0";
    m.attr("DEFAULT_BANDWIDTH_GRID") = default_bandwidth_grid();
}
