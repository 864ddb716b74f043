#include "procal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "procal/numeric.hpp"
#include "procal/simplex.hpp"

namespace procal {

namespace {

constexpr double kTemperatureLo = 0.05;
constexpr double kTemperatureHi = 20.0;

Matrix effective_logits(const LabeledPredictions& dataset) {
    if (dataset.has_logits()) return dataset.logits();
    const auto& preds = dataset.predictions();
    Matrix logits(preds.rows(), preds.cols());
    for (std::size_t r = 0; r < preds.rows(); ++r)
        for (std::size_t c = 0; c < preds.cols(); ++c) logits(r, c) = clamped_log(preds(r, c));
    return logits;
}

double mean_nll(const Matrix& logits, std::span<const int> labels, double temperature) {
    KahanSum sum;
    const double inv_t = 1.0 / temperature;
    std::vector<double> scaled(logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) scaled[c] = row[c] * inv_t;
        sum.add(log_sum_exp(scaled) - scaled[static_cast<std::size_t>(labels[r])]);
    }
    return sum.value() / static_cast<double>(logits.rows());
}

}  // namespace

TemperatureFitResult temperature_fit(const LabeledPredictions& validation) {
    const Matrix logits = effective_logits(validation);
    const auto labels = validation.labels();

    TemperatureFitResult result;
    const std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        // NLL is monotone in T when only one class is present; report the
        // better bracket endpoint instead of pretending there is an interior
        // optimum.
        result.degenerate_labels = true;
        const double lo = mean_nll(logits, labels, kTemperatureLo);
        const double hi = mean_nll(logits, labels, kTemperatureHi);
        result.model.temperature = lo <= hi ? kTemperatureLo : kTemperatureHi;
        result.nll = std::min(lo, hi);
        return result;
    }

    // Golden-section search on u = log T; the NLL is unimodal in T in practice.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(kTemperatureLo);
    double b = std::log(kTemperatureHi);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = mean_nll(logits, labels, std::exp(c));
    double fd = mean_nll(logits, labels, std::exp(d));
    while (b - a > 1e-4) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mean_nll(logits, labels, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mean_nll(logits, labels, std::exp(d));
        }
    }
    result.model.temperature = std::exp(0.5 * (a + b));
    result.nll = mean_nll(logits, labels, result.model.temperature);
    return result;
}

LabeledPredictions temperature_apply(const TemperatureModel& model,
                                     const LabeledPredictions& dataset) {
    if (!(model.temperature > 0.0) || !std::isfinite(model.temperature))
        throw InputError("temperature must be positive and finite");
    const Matrix logits = effective_logits(dataset);
    Matrix scaled(logits.rows(), logits.cols());
    Matrix preds(logits.rows(), logits.cols());
    const double inv_t = 1.0 / model.temperature;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        for (std::size_t c = 0; c < logits.cols(); ++c) scaled(r, c) = logits(r, c) * inv_t;
        const auto p = softmax(scaled.row(r));
        std::copy(p.begin(), p.end(), preds.row(r).begin());
    }
    return LabeledPredictions(std::move(preds),
                              std::vector<int>(dataset.labels().begin(), dataset.labels().end()),
                              dataset.class_count(), std::move(scaled));
}

std::vector<double> pav_nondecreasing(std::span<const double> targets,
                                      std::span<const double> weights) {
    if (targets.size() != weights.size())
        throw DimensionMismatchError("targets and weights differ in length");
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        blocks.push_back({targets[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value >= blocks.back().value) {
            const Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            prev.value = (prev.value * prev.weight + top.value * top.weight) /
                         (prev.weight + top.weight);
            prev.weight += top.weight;
            prev.count += top.count;
        }
    }
    std::vector<double> fitted;
    fitted.reserve(targets.size());
    for (const auto& b : blocks) fitted.insert(fitted.end(), b.count, b.value);
    return fitted;
}

IsotonicModel isotonic_fit(const LabeledPredictions& validation) {
    if (validation.class_count() != validation.prediction_dim())
        throw DimensionMismatchError("isotonic fit needs predictions and labels on the same simplex");
    const auto& preds = validation.predictions();
    const auto labels = validation.labels();
    const std::size_t n = validation.size();
    const auto k = static_cast<std::size_t>(validation.class_count());

    IsotonicModel model;
    model.classes.resize(k);
    std::vector<std::size_t> order(n);
    for (std::size_t cls = 0; cls < k; ++cls) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return preds(a, cls) < preds(b, cls);
        });
        // Pool exact score ties before PAV so the fit is a function of the score.
        std::vector<double> scores;
        std::vector<double> targets;
        std::vector<double> weights;
        for (std::size_t idx = 0; idx < n;) {
            const double s = preds(order[idx], cls);
            double hits = 0.0;
            std::size_t count = 0;
            while (idx < n && preds(order[idx], cls) == s) {
                hits += labels[order[idx]] == static_cast<int>(cls) ? 1.0 : 0.0;
                ++count;
                ++idx;
            }
            scores.push_back(s);
            targets.push_back(hits / static_cast<double>(count));
            weights.push_back(static_cast<double>(count));
        }
        auto& out = model.classes[cls];
        out.breakpoints = std::move(scores);
        out.values = pav_nondecreasing(targets, weights);
    }
    return model;
}

double isotonic_predict_one(const IsotonicClassModel& cls, double score) {
    if (cls.breakpoints.empty()) throw InternalError("empty isotonic class model");
    if (score < cls.breakpoints.front()) return cls.values.front();
    const auto it = std::upper_bound(cls.breakpoints.begin(), cls.breakpoints.end(), score);
    const auto idx = static_cast<std::size_t>(it - cls.breakpoints.begin()) - 1;
    return cls.values[idx];
}

LabeledPredictions isotonic_apply(const IsotonicModel& model, const LabeledPredictions& dataset) {
    if (model.classes.size() != static_cast<std::size_t>(dataset.prediction_dim()))
        throw DimensionMismatchError("model has " + std::to_string(model.classes.size()) +
                                     " classes but predictions have " +
                                     std::to_string(dataset.prediction_dim()) + " columns");
    const auto& preds = dataset.predictions();
    Matrix out(preds.rows(), preds.cols());
    for (std::size_t r = 0; r < preds.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < preds.cols(); ++c) {
            out(r, c) = isotonic_predict_one(model.classes[c], preds(r, c));
            sum += out(r, c);
        }
        if (sum <= 0.0)
            for (std::size_t c = 0; c < preds.cols(); ++c) out(r, c) = 1.0 / preds.cols();
    }
    return LabeledPredictions(std::move(out),
                              std::vector<int>(dataset.labels().begin(), dataset.labels().end()),
                              dataset.class_count());
}

nlohmann::json to_json(const CalibrationModel& model) {
    if (const auto* ts = std::get_if<TemperatureModel>(&model))
        return {{"type", "temperature"}, {"T", ts->temperature}};
    const auto& ir = std::get<IsotonicModel>(model);
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& cls : ir.classes)
        classes.push_back({{"breakpoints", cls.breakpoints}, {"values", cls.values}});
    return {{"type", "isotonic"}, {"classes", classes}};
}

CalibrationModel calibration_model_from_json(const nlohmann::json& doc) {
    if (!doc.contains("type")) throw InputError("calibration model is missing 'type'");
    const auto type = doc["type"].get<std::string>();
    if (type == "temperature") {
        TemperatureModel model;
        model.temperature = doc.at("T").get<double>();
        if (!(model.temperature > 0.0) || !std::isfinite(model.temperature))
            throw InputError("temperature model has non-positive T");
        return model;
    }
    if (type == "isotonic") {
        IsotonicModel model;
        for (const auto& cls : doc.at("classes")) {
            IsotonicClassModel c;
            c.breakpoints = cls.at("breakpoints").get<std::vector<double>>();
            c.values = cls.at("values").get<std::vector<double>>();
            if (c.breakpoints.size() != c.values.size() || c.breakpoints.empty())
                throw InputError("isotonic class model is malformed");
            if (!std::is_sorted(c.values.begin(), c.values.end()))
                throw InputError("isotonic fitted values must be non-decreasing");
            model.classes.push_back(std::move(c));
        }
        return model;
    }
    throw InputError("unknown calibration model type '" + type + "'");
}

void save_model(const std::filesystem::path& path, const CalibrationModel& model) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json(model).dump(2) << '\n';
}

CalibrationModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed model file: " + std::string(e.what()));
    }
    return calibration_model_from_json(doc);
}

LabeledPredictions apply_model(const CalibrationModel& model, const LabeledPredictions& dataset) {
    if (const auto* ts = std::get_if<TemperatureModel>(&model))
        return temperature_apply(*ts, dataset);
    return isotonic_apply(std::get<IsotonicModel>(model), dataset);
}

}  // namespace procal
