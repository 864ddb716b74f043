#include "procal/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "procal/simplex.hpp"

namespace procal {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

double parse_double(const std::string& field, std::size_t line_no) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(line_no, "not a number: '" + field + "'");
    return v;
}

long parse_label(const std::string& field, std::size_t line_no) {
    long v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(line_no, "not an integer label: '" + field + "'");
    return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

struct ParsedRows {
    std::vector<std::vector<double>> values;
    std::vector<int> labels;
    bool logits = false;
};

// Shared assembly: logit rows become probabilities through softmax and the
// raw logits are kept; probability rows must already sum to 1 within the
// accepted tolerance.
LabeledPredictions assemble(ParsedRows rows, const std::vector<std::size_t>& line_numbers) {
    if (rows.values.empty()) throw InputError("prediction file holds no data rows");
    const std::size_t k = rows.values.front().size();
    std::optional<Matrix> logits;
    Matrix preds(rows.values.size(), k);
    if (rows.logits) logits = Matrix(rows.values.size(), k);
    for (std::size_t r = 0; r < rows.values.size(); ++r) {
        const auto& row = rows.values[r];
        if (row.size() != k)
            throw ParseError(line_numbers[r], "expected " + std::to_string(k) + " values, got " +
                                                  std::to_string(row.size()));
        if (rows.logits) {
            for (double z : row)
                if (!std::isfinite(z)) throw ParseError(line_numbers[r], "non-finite logit");
            const auto p = softmax(row);
            for (std::size_t c = 0; c < k; ++c) {
                preds(r, c) = p[c];
                (*logits)(r, c) = row[c];
            }
        } else {
            double sum = 0.0;
            for (double p : row) {
                if (!std::isfinite(p)) throw ParseError(line_numbers[r], "non-finite probability");
                if (p < 0.0) throw ParseError(line_numbers[r], "negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw ParseError(line_numbers[r],
                                 "probabilities sum to " + std::to_string(sum) +
                                     ", more than " + std::to_string(kRowSumTolerance) +
                                     " away from 1");
            for (std::size_t c = 0; c < k; ++c) preds(r, c) = row[c];
        }
    }
    const int class_count = static_cast<int>(k);
    for (std::size_t r = 0; r < rows.labels.size(); ++r) {
        if (rows.labels[r] < 0 || rows.labels[r] >= class_count)
            throw LabelOutOfRangeError(line_numbers[r], rows.labels[r], class_count);
    }
    return LabeledPredictions(std::move(preds), std::move(rows.labels), class_count,
                              std::move(logits));
}

LabeledPredictions load_csv(const std::filesystem::path& path, PredictionFormat format) {
    auto in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty file: " + path.string());
    const auto header = split_csv(strip(line));
    if (header.size() < 3 || strip(header.back()) != "label")
        throw ParseError(1, "expected header p_0,...,p_{k-1},label or z_0,...,z_{k-1},label");
    const std::string first = strip(header.front());
    bool logits;
    if (first == "p_0")
        logits = false;
    else if (first == "z_0")
        logits = true;
    else
        throw ParseError(1, "unrecognized first column '" + first + "'");
    if (format == PredictionFormat::ProbCsv && logits)
        throw ParseError(1, "probability format requested but file has logit columns");
    if (format == PredictionFormat::LogitCsv && !logits)
        throw ParseError(1, "logit format requested but file has probability columns");

    const std::size_t k = header.size() - 1;
    ParsedRows rows;
    rows.logits = logits;
    std::vector<std::size_t> line_numbers;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string cleaned = strip(line);
        if (cleaned.empty()) continue;
        const auto fields = split_csv(cleaned);
        if (fields.size() != k + 1)
            throw ParseError(line_no, "expected " + std::to_string(k + 1) + " fields, got " +
                                          std::to_string(fields.size()));
        std::vector<double> values(k);
        for (std::size_t c = 0; c < k; ++c) values[c] = parse_double(strip(fields[c]), line_no);
        rows.values.push_back(std::move(values));
        rows.labels.push_back(static_cast<int>(parse_label(strip(fields[k]), line_no)));
        line_numbers.push_back(line_no);
    }
    return assemble(std::move(rows), line_numbers);
}

LabeledPredictions load_jsonl(const std::filesystem::path& path, PredictionFormat format) {
    auto in = open_or_throw(path);
    ParsedRows rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    bool format_known = format == PredictionFormat::ProbJsonl || format == PredictionFormat::LogitJsonl;
    if (format_known) rows.logits = format == PredictionFormat::LogitJsonl;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string cleaned = strip(line);
        if (cleaned.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(cleaned);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        const bool has_probs = obj.contains("probs");
        const bool has_logits = obj.contains("logits");
        if (has_probs == has_logits)
            throw ParseError(line_no, "each object needs exactly one of 'probs' or 'logits'");
        if (!format_known) {
            rows.logits = has_logits;
            format_known = true;
        } else if (rows.logits != has_logits) {
            throw ParseError(line_no, "mixed 'probs' and 'logits' objects in one file");
        }
        if (!obj.contains("label") || !obj["label"].is_number_integer())
            throw ParseError(line_no, "missing integer 'label'");
        const auto& arr = obj[rows.logits ? "logits" : "probs"];
        if (!arr.is_array()) throw ParseError(line_no, "'probs'/'logits' must be an array");
        std::vector<double> values;
        values.reserve(arr.size());
        for (const auto& v : arr) {
            if (!v.is_number()) throw ParseError(line_no, "non-numeric entry");
            values.push_back(v.get<double>());
        }
        rows.values.push_back(std::move(values));
        rows.labels.push_back(obj["label"].get<int>());
        line_numbers.push_back(line_no);
    }
    return assemble(std::move(rows), line_numbers);
}

}  // namespace

LabeledPredictions load_predictions(const std::filesystem::path& path, PredictionFormat format) {
    switch (format) {
        case PredictionFormat::ProbJsonl:
        case PredictionFormat::LogitJsonl:
            return load_jsonl(path, format);
        case PredictionFormat::ProbCsv:
        case PredictionFormat::LogitCsv:
            return load_csv(path, format);
        case PredictionFormat::Auto:
            break;
    }
    if (path.extension() == ".jsonl") return load_jsonl(path, PredictionFormat::Auto);
    return load_csv(path, PredictionFormat::Auto);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_predictions(const std::filesystem::path& path, const LabeledPredictions& dataset,
                      bool write_logits) {
    if (write_logits && !dataset.has_logits())
        throw InputError("dataset carries no logits to write");
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    const auto& values = write_logits ? dataset.logits() : dataset.predictions();
    const char prefix = write_logits ? 'z' : 'p';
    for (std::size_t c = 0; c < values.cols(); ++c) out << prefix << '_' << c << ',';
    out << "label\n";
    const auto labels = dataset.labels();
    for (std::size_t r = 0; r < values.rows(); ++r) {
        for (std::size_t c = 0; c < values.cols(); ++c) out << format_double(values(r, c)) << ',';
        out << labels[r] << '\n';
    }
}

FeatureTable load_features(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty file: " + path.string());
    const auto header = split_csv(strip(line));
    if (header.size() < 2 || strip(header.front()) != "f_0" || strip(header.back()) != "label")
        throw ParseError(1, "expected header f_0,...,f_{d-1},label");
    const std::size_t d = header.size() - 1;

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string cleaned = strip(line);
        if (cleaned.empty()) continue;
        const auto fields = split_csv(cleaned);
        if (fields.size() != d + 1)
            throw ParseError(line_no, "expected " + std::to_string(d + 1) + " fields, got " +
                                          std::to_string(fields.size()));
        std::vector<double> values(d);
        for (std::size_t c = 0; c < d; ++c) {
            values[c] = parse_double(strip(fields[c]), line_no);
            if (!std::isfinite(values[c])) throw ParseError(line_no, "non-finite feature");
        }
        const long label = parse_label(strip(fields[d]), line_no);
        if (label < 0) throw LabelOutOfRangeError(line_no, label, 0);
        rows.push_back(std::move(values));
        labels.push_back(static_cast<int>(label));
    }
    if (rows.empty()) throw InputError("feature file holds no data rows");
    FeatureTable table;
    table.features = Matrix::from_rows(rows);
    table.labels = std::move(labels);
    int max_label = 0;
    for (int l : table.labels) max_label = std::max(max_label, l);
    table.class_count = std::max(max_label + 1, 2);
    return table;
}

void save_features(const std::filesystem::path& path, const Matrix& features,
                   std::span<const int> labels) {
    if (features.rows() != labels.size())
        throw DimensionMismatchError("feature rows and labels differ in length");
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    for (std::size_t c = 0; c < features.cols(); ++c) out << "f_" << c << ',';
    out << "label\n";
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < features.cols(); ++c) out << format_double(features(r, c)) << ',';
        out << labels[r] << '\n';
    }
}

void save_truth(const std::filesystem::path& path, const Matrix& truth) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    for (std::size_t c = 0; c < truth.cols(); ++c) {
        out << "t_" << c;
        out << (c + 1 < truth.cols() ? ',' : '\n');
    }
    for (std::size_t r = 0; r < truth.rows(); ++r) {
        for (std::size_t c = 0; c < truth.cols(); ++c) {
            out << format_double(truth(r, c));
            out << (c + 1 < truth.cols() ? ',' : '\n');
        }
    }
}

Matrix load_truth(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty file: " + path.string());
    const auto header = split_csv(strip(line));
    if (header.empty() || strip(header.front()) != "t_0")
        throw ParseError(1, "expected header t_0,...,t_{k-1}");
    const std::size_t k = header.size();
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string cleaned = strip(line);
        if (cleaned.empty()) continue;
        const auto fields = split_csv(cleaned);
        if (fields.size() != k)
            throw ParseError(line_no, "expected " + std::to_string(k) + " fields");
        std::vector<double> values(k);
        for (std::size_t c = 0; c < k; ++c) values[c] = parse_double(strip(fields[c]), line_no);
        rows.push_back(std::move(values));
    }
    return Matrix::from_rows(rows);
}

}  // namespace procal
